// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwgan/errors.hpp"
#include "fwgan/rng.hpp"
#include "fwgan/serialize.hpp"
#include "fwgan/tensor.hpp"

namespace fwgan {

enum class SyntheticName { MoG, Banana, Rings, Square, Cosine, Funnel };

inline SyntheticName synthetic_from_string(const std::string& raw) {
    std::string s = raw;
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (s == "mog") return SyntheticName::MoG;
    if (s == "banana") return SyntheticName::Banana;
    if (s == "rings") return SyntheticName::Rings;
    if (s == "square") return SyntheticName::Square;
    if (s == "cosine") return SyntheticName::Cosine;
    if (s == "funnel") return SyntheticName::Funnel;
    throw config_error("unknown synthetic dataset '" + raw +
                       "' (expected mog, banana, rings, square, cosine, or funnel)");
}

inline std::string to_string(SyntheticName n) {
    switch (n) {
        case SyntheticName::MoG: return "mog";
        case SyntheticName::Banana: return "banana";
        case SyntheticName::Rings: return "rings";
        case SyntheticName::Square: return "square";
        case SyntheticName::Cosine: return "cosine";
        case SyntheticName::Funnel: return "funnel";
    }
    throw std::logic_error("to_string(SyntheticName): unreachable");
}

struct SyntheticSpec {
    SyntheticName name;
    int n_samples;
    std::uint64_t seed;
};

/// Seeded draws from the six 2-D toy distributions. Per-sample draw order is
/// fixed (documented inline) so a (name, n, stream-state) triple fully
/// determines the tensor.
///
/// Definitions and their analytic moments (used by the statistical tests):
///   mog:    equal mixture of 8 Gaussians (sigma 0.2) at radius 2 around the
///           origin; mean (0,0), per-coordinate variance 2.04.
///   banana: (n1, n2 + 0.5 n1^2 - 1) with n i.i.d. standard normal;
///           mean (0,-0.5), variances (1, 1.5).
///   rings:  circles of radius {1,2} with N(0, 0.05^2) radial noise;
///           mean (0,0), per-coordinate variance (2.5 + 0.0025)/2.
///   square: uniform on the boundary of [-2,2]^2 plus N(0, 0.05^2) per
///           coordinate; mean (0,0), per-coordinate variance 8/3 + 0.0025.
///   cosine: x1 ~ U(-4,4), x2 = 2 cos(2 x1) + N(0, 0.2^2);
///           E[x2] = sin(8)/4, var(x1) = 16/3.
///   funnel: x1 ~ N(0,1), x2 ~ N(0, e^{x1}); var(x2) = e^{1/2}.
inline Tensor sample_synthetic(SyntheticName name, int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_synthetic: n must be >= 1");
    Tensor out(n, 2);
    for (int i = 0; i < n; ++i) {
        double x = 0.0, y = 0.0;
        switch (name) {
            case SyntheticName::MoG: {
                // draws: component, then 2 normals
                const int k = rng.uniform_int(8);
                const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / 8.0;
                x = 2.0 * std::cos(a) + 0.2 * rng.normal();
                y = 2.0 * std::sin(a) + 0.2 * rng.normal();
                break;
            }
            case SyntheticName::Banana: {
                // draws: 2 normals
                const double n1 = rng.normal();
                const double n2 = rng.normal();
                x = n1;
                y = n2 + 0.5 * n1 * n1 - 1.0;
                break;
            }
            case SyntheticName::Rings: {
                // draws: ring index, angle, radial normal
                const int k = rng.uniform_int(2);
                const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
                const double r = (k == 0 ? 1.0 : 2.0) + 0.05 * rng.normal();
                x = r * std::cos(theta);
                y = r * std::sin(theta);
                break;
            }
            case SyntheticName::Square: {
                // draws: edge index, position, 2 normals
                const int e = rng.uniform_int(4);
                const double t = rng.uniform(-2.0, 2.0);
                switch (e) {
                    case 0: x = t; y = -2.0; break;
                    case 1: x = t; y = 2.0; break;
                    case 2: x = -2.0; y = t; break;
                    default: x = 2.0; y = t; break;
                }
                x += 0.05 * rng.normal();
                y += 0.05 * rng.normal();
                break;
            }
            case SyntheticName::Cosine: {
                // draws: uniform, normal
                x = rng.uniform(-4.0, 4.0);
                y = 2.0 * std::cos(2.0 * x) + 0.2 * rng.normal();
                break;
            }
            case SyntheticName::Funnel: {
                // draws: 2 normals
                x = rng.normal();
                y = rng.normal() * std::exp(0.5 * x);
                break;
            }
        }
        out(i, 0) = x;
        out(i, 1) = y;
    }
    return out;
}

inline Tensor sample_synthetic(const SyntheticSpec& spec) {
    RngStream rng = RngStream::from_seed_and_salt(spec.seed, salt::kData);
    return sample_synthetic(spec.name, spec.n_samples, rng);
}

struct CsvOptions {
    bool has_header = false;
    char delimiter = ',';
};

/// Parse a rectangular numeric CSV into a tensor. All failures carry the
/// offending 1-based line number.
inline Tensor load_csv(const std::string& path, const CsvOptions& opt = {}) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open dataset file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    bool skipped_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (opt.has_header && !skipped_header) {
            skipped_header = true;
            continue;
        }
        std::vector<double> row;
        std::string cell;
        std::istringstream ls(line);
        int col = 0;
        while (std::getline(ls, cell, opt.delimiter)) {
            ++col;
            row.push_back(parse_double_cell(cell, path + " line " + std::to_string(lineno) +
                                                      " column " + std::to_string(col)));
        }
        if (row.empty())
            throw config_error(path + " line " + std::to_string(lineno) + ": no fields");
        if (!rows.empty() && row.size() != rows.front().size())
            throw config_error(path + " line " + std::to_string(lineno) + ": expected " +
                               std::to_string(rows.front().size()) + " fields, got " +
                               std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw config_error(path + ": no data rows");
    Tensor out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (int i = 0; i < out.rows(); ++i)
        for (int j = 0; j < out.cols(); ++j) out(i, j) = rows[static_cast<std::size_t>(i)]
                                                             [static_cast<std::size_t>(j)];
    return out;
}

/// Write a tensor as CSV with 17-significant-digit floats (bit-faithful
/// round-trip through load_csv). Optional header row.
inline void write_csv(const std::string& path, const Tensor& t,
                      const std::vector<std::string>& header = {}) {
    std::ostringstream out;
    if (!header.empty()) {
        if (static_cast<int>(header.size()) != t.cols())
            throw std::invalid_argument("write_csv: header width mismatch");
        for (std::size_t j = 0; j < header.size(); ++j)
            out << (j ? "," : "") << header[j];
        out << '\n';
    }
    for (int i = 0; i < t.rows(); ++i) {
        for (int j = 0; j < t.cols(); ++j) out << (j ? "," : "") << format_g17(t(i, j));
        out << '\n';
    }
    atomic_write_text(path, out.str());
}

/// Standardized train/validation split of a tabular matrix. Column statistics
/// come from the training split only and are applied to both.
struct TabularDataset {
    Tensor train;
    Tensor valid;
    std::vector<double> means;  // training-split column means (pre-standardization)
    std::vector<double> stds;   // training-split column stds, floored at 1e-8
    std::vector<int> train_idx;
    std::vector<int> valid_idx;
};

inline TabularDataset standardize_split(const Tensor& data, double valid_fraction,
                                        std::uint64_t seed) {
    if (!(valid_fraction > 0.0 && valid_fraction < 1.0))
        throw std::invalid_argument("standardize_split: valid_fraction must be in (0,1)");
    const int n = data.rows();
    const int d = data.cols();
    int n_valid = static_cast<int>(std::lround(valid_fraction * n));
    n_valid = std::max(1, std::min(n - 1, n_valid));
    if (n < 2) throw std::invalid_argument("standardize_split: need at least 2 rows");

    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng = RngStream::from_seed_and_salt(seed, salt::kData);
    rng.shuffle(idx);

    TabularDataset out;
    out.valid_idx.assign(idx.begin(), idx.begin() + n_valid);
    out.train_idx.assign(idx.begin() + n_valid, idx.end());
    const int n_train = n - n_valid;

    out.means.assign(static_cast<std::size_t>(d), 0.0);
    out.stds.assign(static_cast<std::size_t>(d), 0.0);
    for (int i : out.train_idx)
        for (int j = 0; j < d; ++j) out.means[static_cast<std::size_t>(j)] += data(i, j);
    for (auto& m : out.means) m /= static_cast<double>(n_train);
    for (int i : out.train_idx)
        for (int j = 0; j < d; ++j) {
            const double dev = data(i, j) - out.means[static_cast<std::size_t>(j)];
            out.stds[static_cast<std::size_t>(j)] += dev * dev;
        }
    for (auto& s : out.stds) s = std::max(std::sqrt(s / static_cast<double>(n_train)), 1e-8);

    auto gather = [&](const std::vector<int>& which) {
        Tensor t(static_cast<int>(which.size()), d);
        for (std::size_t r = 0; r < which.size(); ++r)
            for (int j = 0; j < d; ++j)
                t(static_cast<int>(r), j) = (data(which[r], j) -
                                             out.means[static_cast<std::size_t>(j)]) /
                                            out.stds[static_cast<std::size_t>(j)];
        return t;
    };
    out.train = gather(out.train_idx);
    out.valid = gather(out.valid_idx);
    return out;
}

}  // namespace fwgan
