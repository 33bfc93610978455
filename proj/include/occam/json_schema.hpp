#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "occam/error.hpp"

namespace occam {

/// Validates a JSON document against the subset of JSON Schema used by the
/// run-config schema: type, properties, required, additionalProperties,
/// items, enum, minimum, exclusiveMinimum, maximum, minItems, oneOf and local
/// "#/definitions/..." refs. The first violation is thrown as a
/// ValidationError carrying the JSON pointer of the offending value.
class SchemaValidator {
public:
    explicit SchemaValidator(nlohmann::json schema) : root_(std::move(schema)) {}

    void validate(const nlohmann::json& doc) const { check(root_, doc, ""); }

    /// Returns the error instead of throwing; empty pointer and message on success.
    std::vector<std::string> errors(const nlohmann::json& doc) const {
        try {
            validate(doc);
        } catch (const ValidationError& e) {
            return {e.pointer(), e.what()};
        }
        return {};
    }

private:
    static std::string escape(const std::string& key) {
        std::string out;
        for (char c : key) {
            if (c == '~') out += "~0";
            else if (c == '/') out += "~1";
            else out += c;
        }
        return out;
    }

    const nlohmann::json& resolve(const nlohmann::json& s) const {
        if (!s.is_object() || !s.contains("$ref")) return s;
        const std::string ref = s["$ref"].get<std::string>();
        if (ref.rfind("#/", 0) != 0) throw std::runtime_error("unsupported schema ref " + ref);
        return root_.at(nlohmann::json::json_pointer(ref.substr(1)));
    }

    static bool type_matches(const std::string& type, const nlohmann::json& v) {
        if (type == "object") return v.is_object();
        if (type == "array") return v.is_array();
        if (type == "string") return v.is_string();
        if (type == "boolean") return v.is_boolean();
        if (type == "null") return v.is_null();
        if (type == "number") return v.is_number();
        if (type == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
        return false;
    }

    void check(const nlohmann::json& schema_in, const nlohmann::json& v, const std::string& ptr) const {
        const auto& s = resolve(schema_in);
        if (s.contains("type")) {
            bool ok = false;
            std::string names;
            if (s["type"].is_array()) {
                for (const auto& t : s["type"]) {
                    ok = ok || type_matches(t.get<std::string>(), v);
                    names += (names.empty() ? "" : "|") + t.get<std::string>();
                }
            } else {
                names = s["type"].get<std::string>();
                ok = type_matches(names, v);
            }
            if (!ok) throw ValidationError("expected " + names, ptr);
        }
        if (s.contains("enum")) {
            bool ok = false;
            for (const auto& e : s["enum"]) ok = ok || e == v;
            if (!ok) throw ValidationError("value " + v.dump() + " not in " + s["enum"].dump(), ptr);
        }
        if (v.is_number()) {
            const double x = v.get<double>();
            if (s.contains("minimum") && x < s["minimum"].get<double>())
                throw ValidationError("must be >= " + s["minimum"].dump(), ptr);
            if (s.contains("exclusiveMinimum") && x <= s["exclusiveMinimum"].get<double>())
                throw ValidationError("must be > " + s["exclusiveMinimum"].dump(), ptr);
            if (s.contains("maximum") && x > s["maximum"].get<double>())
                throw ValidationError("must be <= " + s["maximum"].dump(), ptr);
        }
        if (v.is_array()) {
            if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
                throw ValidationError("needs at least " + s["minItems"].dump() + " items", ptr);
            if (s.contains("items"))
                for (std::size_t i = 0; i < v.size(); ++i) check(s["items"], v[i], ptr + "/" + std::to_string(i));
        }
        if (v.is_object()) {
            if (s.contains("required"))
                for (const auto& r : s["required"]) {
                    const auto key = r.get<std::string>();
                    if (!v.contains(key)) throw ValidationError("missing required key '" + key + "'", ptr + "/" + escape(key));
                }
            const nlohmann::json empty = nlohmann::json::object();
            const auto& props = s.contains("properties") ? s["properties"] : empty;
            for (auto it = v.begin(); it != v.end(); ++it) {
                const std::string child = ptr + "/" + escape(it.key());
                if (props.contains(it.key())) {
                    check(props[it.key()], it.value(), child);
                } else if (s.contains("additionalProperties")) {
                    const auto& ap = s["additionalProperties"];
                    if (ap.is_boolean()) {
                        if (!ap.get<bool>()) throw ValidationError("unknown key '" + it.key() + "'", child);
                    } else {
                        check(ap, it.value(), child);
                    }
                }
            }
        }
        if (s.contains("oneOf")) {
            int matches = 0;
            std::optional<ValidationError> first;
            for (const auto& alt : s["oneOf"]) {
                try {
                    check(alt, v, ptr);
                    ++matches;
                } catch (const ValidationError& e) {
                    if (!first) first = e;
                }
            }
            if (matches == 0) throw *first;
            if (matches > 1) throw ValidationError("matches more than one alternative", ptr);
        }
    }

    nlohmann::json root_;
};

} // namespace occam
