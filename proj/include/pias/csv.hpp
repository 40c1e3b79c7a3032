#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pias::csv {

/// Shortest-safe round-trip formatting (17 significant digits); NaN becomes an empty cell.
inline std::string number(double value) {
    if (std::isnan(value)) {
        return {};
    }
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

/// Parses a cell written by number(); empty cells read back as NaN.
inline double parse_number(std::string_view cell) {
    if (cell.empty()) {
        return std::nan("");
    }
    const std::string text(cell);
    char *end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) {
        throw std::runtime_error("malformed number '" + text + "'");
    }
    return value;
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            cells.emplace_back(line.substr(start));
            return cells;
        }
        cells.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline bool read_row(std::istream &in, std::vector<std::string> &cells) {
    std::string line;
    if (!std::getline(in, line)) {
        return false;
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    cells = split(line);
    return true;
}

template <typename Range>
std::string join(const Range &cells, char sep = ',') {
    std::string out;
    bool first = true;
    for (const auto &cell : cells) {
        if (!first) {
            out += sep;
        }
        out += cell;
        first = false;
    }
    return out;
}

}  // namespace pias::csv
