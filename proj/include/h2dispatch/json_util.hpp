#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "h2dispatch/errors.hpp"

namespace h2d::jsonutil {

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& what) {
    if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ValidationError(what + ": unknown key '" + it.key() + "'");
}

inline double get_num(const nlohmann::json& j, const std::string& key, const std::string& what) {
    if (!j.contains(key)) throw ValidationError(what + ": missing key '" + key + "'");
    if (!j.at(key).is_number())
        throw ValidationError(what + ": key '" + key + "' must be a number");
    return j.at(key).get<double>();
}

inline int get_int(const nlohmann::json& j, const std::string& key, const std::string& what) {
    double v = get_num(j, key, what);
    if (v != static_cast<long long>(v))
        throw ValidationError(what + ": key '" + key + "' must be an integer");
    return int(v);
}

inline std::string get_str(const nlohmann::json& j, const std::string& key,
                           const std::string& what) {
    if (!j.contains(key)) throw ValidationError(what + ": missing key '" + key + "'");
    if (!j.at(key).is_string())
        throw ValidationError(what + ": key '" + key + "' must be a string");
    return j.at(key).get<std::string>();
}

} // namespace h2d::jsonutil
