#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "eknit/common.hpp"

// Strict accessors shared by every document reader: unknown keys are a
// SchemaError, wrong types a MalformedError.
namespace eknit::json_util {

using nlohmann::json;

inline void require_object(const json& j, std::string_view where) {
    if (!j.is_object()) throw MalformedError(std::string(where) + ": expected an object");
}

inline void allow_keys(const json& j, std::string_view where,
                       std::initializer_list<std::string_view> keys) {
    require_object(j, where);
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (auto k : keys) known = known || key == k;
        if (!known) {
            throw SchemaError(std::string(where) + ": unknown field '" + key + "'");
        }
    }
}

template <typename T>
T get(const json& j, std::string_view key, std::string_view where) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw MalformedError(std::string(where) + ": missing field '" + std::string(key) + "'");
    }
    try {
        return it->template get<T>();
    } catch (const json::exception& e) {
        throw MalformedError(std::string(where) + "." + std::string(key) + ": " + e.what());
    }
}

template <typename T>
T get_or(const json& j, std::string_view key, T fallback, std::string_view where) {
    if (!j.contains(key)) return fallback;
    return get<T>(j, key, where);
}

inline json parse(const std::string& text, std::string_view where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw MalformedError(std::string(where) + ": " + e.what());
    }
}

inline void require_schema(const json& doc, int expected, std::string_view where) {
    const int schema = get<int>(doc, "schema", where);
    if (schema != expected) {
        throw SchemaError(std::string(where) + ": unsupported schema " + std::to_string(schema) +
                          " (expected " + std::to_string(expected) + ")");
    }
}

}  // namespace eknit::json_util
