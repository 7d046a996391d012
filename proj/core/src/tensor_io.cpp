#include "qcpd/tensor_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "qcpd/error.hpp"

namespace qcpd {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& tok, const fs::path& file, size_t line_no) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw ValidationError(file.string() + ":" + std::to_string(line_no) +
                              ": cannot parse number '" + tok + "'");
    if (!std::isfinite(v))
        throw ValidationError(file.string() + ":" + std::to_string(line_no) +
                              ": non-finite value '" + tok + "'");
    return v;
}

long parse_index(const std::string& tok, const fs::path& file, size_t line_no) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0' || v < 1)
        throw ValidationError(file.string() + ":" + std::to_string(line_no) +
                              ": bad index '" + tok + "'");
    return v;
}

}  // namespace

void save_tensor(const EntityTensor& tensor, const fs::path& dir) {
    fs::create_directories(dir);

    {
        std::ofstream csv(dir / "data.csv");
        if (!csv) throw ValidationError("cannot write " + (dir / "data.csv").string());
        csv << "entity,time";
        for (int s = 1; s <= tensor.sensors(); ++s) csv << ",s" << s;
        csv << "\n";
        for (int p = 1; p <= tensor.entities(); ++p) {
            for (int t = 1; t <= tensor.ticks(); ++t) {
                if (!tensor.active(t, p)) continue;
                csv << p << ',' << t;
                for (int s = 1; s <= tensor.sensors(); ++s)
                    csv << ',' << format_double(tensor.at(s, t, p));
                csv << "\n";
            }
        }
    }

    json meta;
    meta["dt"] = tensor.dt();
    meta["F"] = tensor.sensors();
    meta["T"] = tensor.ticks();
    meta["P"] = tensor.entities();
    if (tensor.annotation())
        meta["change_index"] = tensor.annotation()->true_change_index;
    else
        meta["change_index"] = nullptr;
    std::ofstream mf(dir / "meta.json");
    if (!mf) throw ValidationError("cannot write " + (dir / "meta.json").string());
    mf << meta.dump(2) << "\n";

    if (tensor.has_mask()) {
        std::ofstream mk(dir / "mask.csv");
        if (!mk) throw ValidationError("cannot write " + (dir / "mask.csv").string());
        mk << "entity,time,active\n";
        for (int p = 1; p <= tensor.entities(); ++p)
            for (int t = 1; t <= tensor.ticks(); ++t)
                mk << p << ',' << t << ',' << (tensor.active(t, p) ? 1 : 0) << "\n";
    }
}

EntityTensor load_tensor(const fs::path& dir) {
    const fs::path meta_path = dir / "meta.json";
    const fs::path data_path = dir / "data.csv";
    if (!fs::exists(meta_path))
        throw ValidationError("missing sidecar: expected " + meta_path.string());
    if (!fs::exists(data_path))
        throw ValidationError("missing data file: expected " + data_path.string());

    json meta;
    {
        std::ifstream mf(meta_path);
        try {
            mf >> meta;
        } catch (const json::exception& e) {
            throw ValidationError(meta_path.string() + ": bad JSON (" + e.what() + ")");
        }
    }
    for (const char* key : {"dt", "F", "T", "P", "change_index"})
        if (!meta.contains(key))
            throw ValidationError(meta_path.string() + ": missing key '" + key + "'");

    const double dt = meta["dt"].get<double>();
    const int F = meta["F"].get<int>();
    const int T = meta["T"].get<int>();
    const int P = meta["P"].get<int>();
    if (F < 1 || T < 1 || P < 1 || !(dt > 0))
        throw ValidationError(meta_path.string() + ": invalid dimensions");
    std::optional<ChangePointAnnotation> annotation;
    if (!meta["change_index"].is_null())
        annotation = ChangePointAnnotation{meta["change_index"].get<int>()};

    std::optional<std::vector<std::vector<uint8_t>>> mask;
    const fs::path mask_path = dir / "mask.csv";
    if (fs::exists(mask_path)) {
        mask.emplace(P, std::vector<uint8_t>(T, 0));
        std::ifstream mk(mask_path);
        std::string line;
        size_t line_no = 1;
        if (!std::getline(mk, line) || split_csv_line(line) !=
                std::vector<std::string>{"entity", "time", "active"})
            throw ValidationError(mask_path.string() + ": malformed header");
        while (std::getline(mk, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto tok = split_csv_line(line);
            if (tok.size() != 3)
                throw ValidationError(mask_path.string() + ":" + std::to_string(line_no) +
                                      ": expected 3 columns");
            const long p = parse_index(tok[0], mask_path, line_no);
            const long t = parse_index(tok[1], mask_path, line_no);
            if (p > P || t > T)
                throw ValidationError(mask_path.string() + ":" + std::to_string(line_no) +
                                      ": index out of range");
            (*mask)[p - 1][t - 1] = tok[2] == "1" ? 1 : 0;
        }
    }

    std::vector<Eigen::MatrixXd> per_entity(P, Eigen::MatrixXd::Zero(F, T));
    std::vector<std::vector<uint8_t>> seen(P, std::vector<uint8_t>(T, 0));

    std::ifstream csv(data_path);
    std::string line;
    size_t line_no = 1;
    if (!std::getline(csv, line))
        throw ValidationError(data_path.string() + ": empty file");
    {
        const auto head = split_csv_line(line);
        if (head.size() != static_cast<size_t>(F) + 2 || head[0] != "entity" || head[1] != "time")
            throw ValidationError(data_path.string() +
                                  ": malformed header, expected entity,time,<F sensor columns>");
    }
    while (std::getline(csv, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tok = split_csv_line(line);
        if (tok.size() != static_cast<size_t>(F) + 2)
            throw ValidationError(data_path.string() + ":" + std::to_string(line_no) +
                                  ": expected " + std::to_string(F + 2) + " columns");
        const long p = parse_index(tok[0], data_path, line_no);
        const long t = parse_index(tok[1], data_path, line_no);
        if (p > P || t > T)
            throw ValidationError(data_path.string() + ":" + std::to_string(line_no) +
                                  ": index out of range");
        if (seen[p - 1][t - 1])
            throw ValidationError(data_path.string() + ":" + std::to_string(line_no) +
                                  ": duplicate (entity, time) row");
        seen[p - 1][t - 1] = 1;
        for (int s = 0; s < F; ++s)
            per_entity[p - 1](s, t - 1) = parse_double(tok[s + 2], data_path, line_no);
    }

    for (int p = 0; p < P; ++p) {
        for (int t = 0; t < T; ++t) {
            const bool expected = mask ? (*mask)[p][t] != 0 : true;
            if (expected && !seen[p][t])
                throw ValidationError(data_path.string() + ": non-rectangular data: missing row for entity " +
                                      std::to_string(p + 1) + ", time " + std::to_string(t + 1) +
                                      (mask ? "" : " (no mask sidecar present)"));
            if (!expected && seen[p][t])
                throw ValidationError(data_path.string() + ": row present for masked-out entity " +
                                      std::to_string(p + 1) + ", time " + std::to_string(t + 1));
        }
    }

    return EntityTensor(std::move(per_entity), dt, annotation, std::move(mask));
}

}  // namespace qcpd
