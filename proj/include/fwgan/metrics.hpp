// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwgan/errors.hpp"
#include "fwgan/serialize.hpp"
#include "fwgan/tensor.hpp"

namespace fwgan {

/// Flattened 2-D evaluation grid; res_x * res_y points ordered row-major with
/// y varying slowest: index = iy * res_x + ix.
struct Grid2D {
    double x_lo, x_hi, y_lo, y_hi;
    int res_x, res_y;
    Tensor points;     // k x 2
    double dx, dy;     // spacing (0 when the axis has a single level)
    double cell_area;  // dx * dy
};

inline Grid2D make_grid(double x_lo, double x_hi, double y_lo, double y_hi, int res_x,
                        int res_y) {
    if (res_x < 1 || res_y < 1) throw std::invalid_argument("make_grid: resolution must be >= 1");
    if (!(x_hi >= x_lo && y_hi >= y_lo)) throw std::invalid_argument("make_grid: empty range");
    Grid2D g;
    g.x_lo = x_lo;
    g.x_hi = x_hi;
    g.y_lo = y_lo;
    g.y_hi = y_hi;
    g.res_x = res_x;
    g.res_y = res_y;
    g.dx = res_x > 1 ? (x_hi - x_lo) / static_cast<double>(res_x - 1) : 0.0;
    g.dy = res_y > 1 ? (y_hi - y_lo) / static_cast<double>(res_y - 1) : 0.0;
    g.cell_area = g.dx * g.dy;
    g.points = Tensor(res_x * res_y, 2);
    for (int iy = 0; iy < res_y; ++iy)
        for (int ix = 0; ix < res_x; ++ix) {
            const int k = iy * res_x + ix;
            g.points(k, 0) = x_lo + g.dx * ix;
            g.points(k, 1) = y_lo + g.dy * iy;
        }
    return g;
}

namespace detail {

// Fixed-size row blocks keep the pairwise distance matrices small; the
// summation order is fixed, so results are deterministic.
inline constexpr int kPairBlock = 512;

/// mean over all pairs of exp(-||a_i - b_j||^2 / (2 h^2)).
inline double mean_gaussian_kernel(const Tensor& a, const Tensor& b, double h) {
    const double inv = 1.0 / (2.0 * h * h);
    double sum = 0.0;
    for (int start = 0; start < a.rows(); start += kPairBlock) {
        const int len = std::min(kPairBlock, a.rows() - start);
        Tensor block(len, a.cols());
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < a.cols(); ++j) block(i, j) = a(start + i, j);
        const Tensor d2 = pairwise_sqdist(block, b);
        for (std::int64_t k = 0; k < d2.size(); ++k) sum += std::exp(-d2[k] * inv);
    }
    return sum / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace detail

/// Squared MMD between samples X and Y under the Gaussian kernel
/// k(a,b) = exp(-||a-b||^2 / (2h^2)), as the biased V-statistic
/// mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y). Nonnegative up to roundoff.
/// Callers multiply by 1e3 for reporting.
inline double mmd2_gaussian(const Tensor& x, const Tensor& y, double h) {
    if (x.rows() < 1 || y.rows() < 1) throw std::invalid_argument("mmd2_gaussian: empty sample");
    if (x.cols() != y.cols())
        throw std::invalid_argument("mmd2_gaussian: dimension mismatch (" + x.shape_str() +
                                    " vs " + y.shape_str() + ")");
    if (!(h > 0.0)) throw std::invalid_argument("mmd2_gaussian: bandwidth must be positive");
    return detail::mean_gaussian_kernel(x, x, h) + detail::mean_gaussian_kernel(y, y, h) -
           2.0 * detail::mean_gaussian_kernel(x, y, h);
}

/// Log-density of each point under a Gaussian KDE fitted to samples
/// (diagonal bandwidth h), log-sum-exp stabilized.
inline Tensor kde_log_density(const Tensor& points, const Tensor& samples, double h) {
    if (points.cols() != samples.cols())
        throw std::invalid_argument("kde_log_density: dimension mismatch");
    if (samples.rows() < 1) throw std::invalid_argument("kde_log_density: no samples");
    if (!(h > 0.0)) throw std::invalid_argument("kde_log_density: bandwidth must be positive");
    const double inv = 1.0 / (2.0 * h * h);
    const double d = static_cast<double>(points.cols());
    const double log_norm = std::log(static_cast<double>(samples.rows())) +
                            0.5 * d * std::log(2.0 * std::numbers::pi * h * h);
    Tensor out(points.rows(), 1);
    for (int start = 0; start < points.rows(); start += detail::kPairBlock) {
        const int len = std::min(detail::kPairBlock, points.rows() - start);
        Tensor block(len, points.cols());
        for (int i = 0; i < len; ++i)
            for (int j = 0; j < points.cols(); ++j) block(i, j) = points(start + i, j);
        const Tensor d2 = pairwise_sqdist(block, samples);
        for (int i = 0; i < len; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < samples.rows(); ++j) mx = std::max(mx, -d2(i, j) * inv);
            double acc = 0.0;
            for (int j = 0; j < samples.rows(); ++j) acc += std::exp(-d2(i, j) * inv - mx);
            out(start + i, 0) = mx + std::log(acc) - log_norm;
        }
    }
    return out;
}

inline Tensor kde_density(const Tensor& points, const Tensor& samples, double h) {
    Tensor out = kde_log_density(points, samples, h);
    for (std::int64_t k = 0; k < out.size(); ++k) out[k] = std::exp(out[k]);
    return out;
}

/// Negative log-likelihood of validation points under a KDE fitted to the
/// generated samples: -(1/v) sum_j log[(1/n) sum_i N(val_j; gen_i, h^2 I)].
inline double kde_nll(const Tensor& generated, const Tensor& validation, double h) {
    if (validation.rows() < 1) throw std::invalid_argument("kde_nll: empty validation set");
    const Tensor lp = kde_log_density(validation, generated, h);
    return -lp.mean();
}

/// Estimated density ratio at each row of points:
///   r(x) = exp(T(x)/temp) / mean_ref exp(T(.)/temp),
/// with the normalizer computed over reference_samples (the generator's Q)
/// via logsumexp. Nonnegative and invariant to constant shifts of the critic.
inline Tensor ratio_field(const std::function<Tensor(const Tensor&)>& critic,
                          const Tensor& points, const Tensor& reference_samples, double temp) {
    if (!(temp > 0.0)) throw std::invalid_argument("ratio_field: temp must be positive");
    if (reference_samples.rows() < 1)
        throw std::invalid_argument("ratio_field: empty reference sample");
    const Tensor t_grid = critic(points);
    const Tensor t_ref = critic(reference_samples);
    if (t_grid.size() != points.rows() || t_ref.size() != reference_samples.rows())
        throw std::invalid_argument("ratio_field: critic must return one value per row");
    Tensor scaled_ref(t_ref.rows(), t_ref.cols());
    for (std::int64_t k = 0; k < t_ref.size(); ++k) scaled_ref[k] = t_ref[k] / temp;
    const double log_denom =
        logsumexp_value(scaled_ref) - std::log(static_cast<double>(t_ref.size()));
    Tensor out(points.rows(), 1);
    for (std::int64_t k = 0; k < t_grid.size(); ++k)
        out[k] = std::exp(t_grid[k] / temp - log_denom);
    return out;
}

inline Tensor ratio_field(const std::function<Tensor(const Tensor&)>& critic, const Grid2D& grid,
                          const Tensor& reference_samples, double temp) {
    return ratio_field(critic, grid.points, reference_samples, temp);
}

/// Median of pairwise Euclidean distances over at most max_points rows
/// (leading rows, deterministic). Common bandwidth heuristic for tabular data.
inline double median_pairwise_distance(const Tensor& x, int max_points = 1000) {
    const int n = std::min(x.rows(), max_points);
    if (n < 2) throw std::invalid_argument("median_pairwise_distance: need at least 2 points");
    Tensor head(n, x.cols());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < x.cols(); ++j) head(i, j) = x(i, j);
    const Tensor d2 = pairwise_sqdist(head, head);
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) dist.push_back(std::sqrt(d2(i, j)));
    const std::size_t mid = dist.size() / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    return dist[mid];
}

/// One evaluation row of a training run. NaN marks a metric not computed at
/// that epoch (serialized as an empty CSV cell).
struct MetricRecord {
    int epoch = 0;
    double divergence = std::numeric_limits<double>::quiet_NaN();
    double nll = std::numeric_limits<double>::quiet_NaN();
    double mmd_x1e3 = std::numeric_limits<double>::quiet_NaN();
};

inline int negative_estimate_count(const std::vector<MetricRecord>& log) {
    int count = 0;
    for (const auto& rec : log)
        if (!std::isnan(rec.divergence) && rec.divergence < 0.0) ++count;
    return count;
}

inline std::string metrics_csv_string(const std::vector<MetricRecord>& log) {
    std::ostringstream out;
    out << "epoch,divergence,nll,mmd_x1e3\n";
    auto cell = [](double v) { return std::isnan(v) ? std::string() : format_g17(v); };
    for (const auto& rec : log)
        out << rec.epoch << ',' << cell(rec.divergence) << ',' << cell(rec.nll) << ','
            << cell(rec.mmd_x1e3) << '\n';
    return out.str();
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricRecord>& log) {
    atomic_write_text(path, metrics_csv_string(log));
}

inline std::vector<MetricRecord> read_metrics_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::vector<MetricRecord> log;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != "epoch,divergence,nll,mmd_x1e3")
                throw config_error(path + ": unexpected metrics header '" + line + "'");
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        cells.resize(4);  // trailing empty cells
        const std::string where = path + " line " + std::to_string(lineno);
        MetricRecord rec;
        rec.epoch = static_cast<int>(
            std::lround(parse_double_cell(cells[0], where + " (epoch)")));
        if (!cells[1].empty()) rec.divergence = parse_double_cell(cells[1], where);
        if (!cells[2].empty()) rec.nll = parse_double_cell(cells[2], where);
        if (!cells[3].empty()) rec.mmd_x1e3 = parse_double_cell(cells[3], where);
        log.push_back(rec);
    }
    return log;
}

}  // namespace fwgan
