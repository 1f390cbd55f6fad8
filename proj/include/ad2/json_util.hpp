#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"

#include "ad2/errors.hpp"

namespace ad2 {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Strict-schema helper: every key must be in the allowed set. Collects all
// offenders so the error lists every bad key, not just the first.
inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + ": expected a JSON object");
    std::string bad;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) {
            if (it.key() == a) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            if (!bad.empty()) bad += ", ";
            bad += "\"" + it.key() + "\"";
        }
    }
    if (!bad.empty()) throw ConfigError(context + ": unknown key(s): " + bad);
}

template <typename T>
T json_get(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid value for \"") + key + "\": " + e.what());
    }
}

template <typename T>
T json_require(const json& obj, const char* key, const std::string& context) {
    if (!obj.contains(key)) throw ConfigError(context + ": missing required key \"" + key + "\"");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(context + ": invalid value for \"" + key + "\": " + e.what());
    }
}

}  // namespace ad2
