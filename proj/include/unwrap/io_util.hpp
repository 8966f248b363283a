#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unwrap/errors.hpp"

namespace unwrap::io {

/// All floating-point output in this project goes through this: 9 significant
/// digits, locale-independent, so reruns are byte-identical.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        const size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view field, const std::string& context) {
    field = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ParseError("expected a number in " + context + ", got '" + std::string(field) + "'");
    }
    return v;
}

inline long long parse_int(std::string_view field, const std::string& context) {
    field = trim(field);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw ParseError("expected an integer in " + context + ", got '" + std::string(field) + "'");
    }
    return v;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

/// Plain `key=value` file, one pair per line; '#' starts a comment line.
inline std::map<std::string, std::string> read_keyvalue(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty() || sv.front() == '#') continue;
        const size_t eq = sv.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        kv[std::string(trim(sv.substr(0, eq)))] = std::string(trim(sv.substr(eq + 1)));
    }
    return kv;
}

inline void write_keyvalue(const std::filesystem::path& path,
                           const std::map<std::string, std::string>& kv) {
    auto out = open_output(path);
    for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

/// FNV-1a 64-bit over file bytes; used for input provenance in run manifests.
inline std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for digest");
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace unwrap::io
