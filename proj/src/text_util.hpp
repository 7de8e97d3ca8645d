#pragma once

// Small parsing helpers shared by the text file formats.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "aggmrf/common.hpp"

namespace aggmrf::detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_cells(std::string_view line, char delimiter) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        auto cell = trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"')
            cell = cell.substr(1, cell.size() - 2);
        cells.emplace_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline std::vector<std::string> split_words(std::string_view line) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) words.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return words;
}

/// Hex-float text, exact for every finite double.
inline std::string format_hex(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

/// Shortest decimal text that round-trips; whole counts print without an
/// exponent.
inline std::string format_real(double v) {
    char buf[64];
    if (v == std::floor(v) && std::abs(v) < 9007199254740992.0) {
        const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
        return std::string(buf, ptr);
    }
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
    const std::string str(trim(s));
    if (str.empty()) throw Error("expected a number, got empty text");
    char* end = nullptr;
    const double v = std::strtod(str.c_str(), &end);
    if (end != str.c_str() + str.size()) throw Error("malformed number '" + str + "'");
    return v;
}

inline std::uint64_t parse_uint(std::string_view s) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error("malformed integer '" + std::string(s) + "'");
    return v;
}

/// key=value words of a header line (words without '=' are skipped).
inline std::map<std::string, std::string, std::less<>> parse_fields(std::string_view line) {
    std::map<std::string, std::string, std::less<>> out;
    for (const auto& w : split_words(line)) {
        const auto eq = w.find('=');
        if (eq != std::string::npos) out.emplace(w.substr(0, eq), w.substr(eq + 1));
    }
    return out;
}

inline const std::string& field(const std::map<std::string, std::string, std::less<>>& fields,
                                std::string_view key) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw Error("missing header field '" + std::string(key) + "'");
    return it->second;
}

inline std::int64_t field_int(const std::map<std::string, std::string, std::less<>>& fields,
                              std::string_view key) {
    const auto& s = field(fields, key);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error("malformed header field '" + std::string(key) + "'");
    return v;
}

/// Everything after the first occurrence of key (used for trailing names
/// that may contain spaces).
inline std::string tail_after(std::string_view line, std::string_view key) {
    const auto pos = line.find(key);
    if (pos == std::string_view::npos) throw Error("missing '" + std::string(key) + "'");
    return std::string(line.substr(pos + key.size()));
}

}  // namespace aggmrf::detail
