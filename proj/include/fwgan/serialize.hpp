// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fwgan/errors.hpp"
#include "fwgan/tensor.hpp"

namespace fwgan {

/// Shortest round-trippable decimal form of a double (17 significant digits).
inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

/// Parse a full cell as a finite double; reports `where` on failure.
inline double parse_double_cell(const std::string& cell, const std::string& where) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0'))
        throw config_error(where + ": cannot parse '" + cell + "' as a number");
    if (errno == ERANGE || !std::isfinite(v))
        throw config_error(where + ": value '" + cell + "' is not finite");
    return v;
}

/// Write-then-rename so readers never observe a partial file.
inline void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write_text: cannot open " + tmp);
        out << content;
        if (!out.flush()) throw std::runtime_error("atomic_write_text: write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw std::runtime_error("atomic_write_text: rename to " + path + " failed: " +
                                 ec.message());
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Checkpoint row format: name,rows,cols,v0,v1,... one tensor per line.
inline std::string named_tensor_csv(const std::vector<std::pair<std::string, Tensor>>& items) {
    std::ostringstream out;
    for (const auto& [name, t] : items) {
        out << name << ',' << t.rows() << ',' << t.cols();
        for (std::int64_t k = 0; k < t.size(); ++k) out << ',' << format_g17(t[k]);
        out << '\n';
    }
    return out.str();
}

inline void save_named_tensors(const std::string& path,
                               const std::vector<std::pair<std::string, Tensor>>& items) {
    atomic_write_text(path, named_tensor_csv(items));
}

inline std::vector<std::pair<std::string, Tensor>> load_named_tensors(const std::string& path) {
    const std::string text = read_text_file(path);
    std::vector<std::pair<std::string, Tensor>> items;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + " line " + std::to_string(lineno);
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() < 3) throw config_error(where + ": too few fields for a tensor row");
        const long rows = std::strtol(cells[1].c_str(), nullptr, 10);
        const long cols = std::strtol(cells[2].c_str(), nullptr, 10);
        if (rows <= 0 || cols <= 0) throw config_error(where + ": bad tensor shape");
        if (cells.size() != 3 + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
            throw config_error(where + ": expected " + std::to_string(rows * cols) +
                               " values for " + cells[0]);
        Tensor t(static_cast<int>(rows), static_cast<int>(cols));
        for (std::int64_t k = 0; k < t.size(); ++k)
            t[k] = parse_double_cell(cells[3 + static_cast<std::size_t>(k)],
                                     where + " value " + std::to_string(k));
        items.emplace_back(cells[0], std::move(t));
    }
    if (items.empty()) throw config_error(path + ": no tensors found");
    return items;
}

/// Lookup helper for loaded checkpoints; missing name → config error.
inline const Tensor& find_named_tensor(const std::vector<std::pair<std::string, Tensor>>& items,
                                       const std::string& name, const std::string& path) {
    for (const auto& [n, t] : items)
        if (n == name) return t;
    throw config_error(path + ": missing tensor '" + name + "'");
}

}  // namespace fwgan
