#pragma once

// Minimal delimited-text helpers shared by the file readers.

#include "markdown/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace markdown::csv {

/// Splits one line on commas. Double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    out.push_back(std::move(field));
    return out;
}

inline std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::int64_t to_int(const std::string& s, const char* column, std::size_t line) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ParseError(std::string("column ") + column + ": expected an integer, got '" + s + "'", line);
    return v;
}

inline double to_double(const std::string& s, const char* column, std::size_t line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
        throw ParseError(std::string("column ") + column + ": expected a number, got '" + s + "'", line);
    return v;
}

/// Shortest text that reads back to the same double.
inline std::string number(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

/// Reads the header row and checks it starts with `required` in order.
inline std::vector<std::string> header(std::istream& in, const std::vector<std::string>& required) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header row", 1);
    auto cols = split(line);
    if (cols.size() < required.size()) throw ParseError("header has too few columns", 1);
    for (std::size_t i = 0; i < required.size(); ++i)
        if (cols[i] != required[i])
            throw ParseError("header column " + std::to_string(i + 1) + " must be '" + required[i] + "', got '" +
                                 cols[i] + "'",
                             1);
    return cols;
}

}  // namespace markdown::csv
