// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <concepts>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "clueseek/errors.hpp"

namespace clueseek {

using json = nlohmann::json;

// Wire documents are emitted by hand so goldens stay bit-exact: fixed key
// order, seconds rendered with exactly three decimals.
namespace wire {

inline std::string sec(double seconds) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", seconds);
    return buf;
}

inline std::string str(const std::string & s) {
    return json(s).dump();
}

inline std::string num(double v) {
    return json(v).dump();
}

template <std::integral T>
std::string num(T v) {
    return std::to_string(v);
}

inline std::string boolean(bool v) {
    return v ? "true" : "false";
}

template <typename T, typename Fn>
std::string array(const std::vector<T> & items, Fn && render) {
    std::string out = "[";
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += render(items[i]);
    }
    out += "]";
    return out;
}

} // namespace wire

inline json parse_json(const std::string & text, const std::string & what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw Error(ErrorCode::Malformed, what + ": invalid JSON");
    }
    return j;
}

inline const json & require_field(const json & j, const char * key, const std::string & what) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw Error(ErrorCode::Malformed, what + ": missing field '" + key + "'");
    }
    return *it;
}

inline double require_number(const json & j, const char * key, const std::string & what) {
    const json & v = require_field(j, key, what);
    if (!v.is_number()) {
        throw Error(ErrorCode::Malformed, what + ": field '" + key + "' must be a number");
    }
    return v.get<double>();
}

inline long long require_integer(const json & j, const char * key, const std::string & what) {
    const json & v = require_field(j, key, what);
    if (!v.is_number_integer()) {
        throw Error(ErrorCode::Malformed, what + ": field '" + key + "' must be an integer");
    }
    return v.get<long long>();
}

inline std::string require_string(const json & j, const char * key, const std::string & what) {
    const json & v = require_field(j, key, what);
    if (!v.is_string()) {
        throw Error(ErrorCode::Malformed, what + ": field '" + key + "' must be a string");
    }
    return v.get<std::string>();
}

} // namespace clueseek
