#include "qcpd/json_schema.hpp"

#include "qcpd/error.hpp"

namespace qcpd {

using nlohmann::json;

namespace {

bool type_matches(const std::string& type, const json& doc) {
    if (type == "object") return doc.is_object();
    if (type == "array") return doc.is_array();
    if (type == "string") return doc.is_string();
    if (type == "number") return doc.is_number();
    if (type == "integer") return doc.is_number_integer();
    if (type == "boolean") return doc.is_boolean();
    if (type == "null") return doc.is_null();
    return false;
}

void check(const json& schema, const json& doc, const std::string& path,
           std::vector<std::string>* out) {
    if (schema.contains("type")) {
        const json& t = schema["type"];
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(t.get<std::string>(), doc);
        } else if (t.is_array()) {
            for (const auto& alt : t)
                if (type_matches(alt.get<std::string>(), doc)) ok = true;
        }
        if (!ok) {
            out->push_back(path + ": expected type " + t.dump() + ", got " +
                           std::string(doc.type_name()));
            return;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& v : schema["enum"])
            if (v == doc) ok = true;
        if (!ok) out->push_back(path + ": value " + doc.dump() + " not in enum");
    }
    if (schema.contains("minimum") && doc.is_number() &&
        doc.get<double>() < schema["minimum"].get<double>())
        out->push_back(path + ": value below minimum " + schema["minimum"].dump());

    if (doc.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema["required"])
                if (!doc.contains(key.get<std::string>()))
                    out->push_back(path + ": missing required key '" + key.get<std::string>() +
                                   "'");
        if (schema.contains("properties"))
            for (const auto& [key, sub] : schema["properties"].items())
                if (doc.contains(key)) check(sub, doc[key], path + "/" + key, out);
    }
    if (doc.is_array() && schema.contains("items")) {
        size_t i = 0;
        for (const auto& item : doc) {
            check(schema["items"], item, path + "/" + std::to_string(i), out);
            ++i;
        }
    }
}

}  // namespace

std::vector<std::string> schema_violations(const json& schema, const json& doc) {
    std::vector<std::string> out;
    check(schema, doc, "#", &out);
    return out;
}

void validate_against_schema(const json& schema, const json& doc, const std::string& what) {
    const auto violations = schema_violations(schema, doc);
    if (violations.empty()) return;
    std::string msg = what + " failed schema validation:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ValidationError(msg);
}

}  // namespace qcpd
