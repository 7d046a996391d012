#pragma once

#include <filesystem>
#include <string>

#include "qcpd/tensor.hpp"

namespace qcpd {

// Dataset directory layout:
//   data.csv  header `entity,time,s1,...,sF`, rows sorted by (entity, time),
//             values printed with 17 significant digits so doubles round-trip
//             bit-exactly
//   meta.json {dt, change_index|null, F, T, P}
//   mask.csv  optional `entity,time,active` sidecar; when present data.csv
//             holds only the active rows
void save_tensor(const EntityTensor& tensor, const std::filesystem::path& dir);

EntityTensor load_tensor(const std::filesystem::path& dir);

// 17-significant-digit decimal form that parses back to the identical double.
std::string format_double(double v);

}  // namespace qcpd
