#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace qcpd {

// Validates a document against the structural subset of JSON Schema used by
// the schemas shipped under schemas/: type (single or list), required,
// properties, items, enum, minimum. Returns human-readable violations;
// empty means valid.
std::vector<std::string> schema_violations(const nlohmann::json& schema,
                                           const nlohmann::json& doc);

// Throws ValidationError listing the violations, if any.
void validate_against_schema(const nlohmann::json& schema, const nlohmann::json& doc,
                             const std::string& what);

}  // namespace qcpd
