// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fwgan {

/// Dense row-major 2-D array of doubles. The universal numeric carrier:
/// sample batches are rows, critic outputs are m-by-1 columns, scalars are
/// 1-by-1. Value semantics; no operation mutates its inputs.
class Tensor {
  public:
    Tensor() = default;

    Tensor(int rows, int cols) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative dimension");
        data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    }

    Tensor(int rows, int cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Tensor: negative dimension");
        if (data_.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                        " != " + std::to_string(rows) + "x" + std::to_string(cols));
    }

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }

    static Tensor full(int rows, int cols, double v) {
        Tensor t(rows, cols);
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor ones(int rows, int cols) { return full(rows, cols, 1.0); }

    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

    /// 1-by-n row vector.
    static Tensor row(std::initializer_list<double> values) {
        return Tensor(1, static_cast<int>(values.size()), std::vector<double>(values));
    }

    /// n-by-1 column vector.
    static Tensor column(std::initializer_list<double> values) {
        return Tensor(static_cast<int>(values.size()), 1, std::vector<double>(values));
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const int r = static_cast<int>(rows.size());
        const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
        Tensor t(r, c);
        int i = 0;
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != c)
                throw std::invalid_argument("Tensor::from_rows: ragged rows");
            std::copy(row.begin(), row.end(), t.data_.begin() + static_cast<std::size_t>(i) * c);
            ++i;
        }
        return t;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::int64_t size() const { return static_cast<std::int64_t>(rows_) * cols_; }
    bool empty() const { return size() == 0; }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double& operator[](std::int64_t k) { return data_[static_cast<std::size_t>(k)]; }
    double operator[](std::int64_t k) const { return data_[static_cast<std::size_t>(k)]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    double sum() const {
        double s = 0.0;
        for (double v : data_) s += v;
        return s;
    }

    double mean() const {
        if (empty()) throw std::invalid_argument("Tensor::mean: empty tensor");
        return sum() / static_cast<double>(size());
    }

    double min() const {
        if (empty()) throw std::invalid_argument("Tensor::min: empty tensor");
        return *std::min_element(data_.begin(), data_.end());
    }

    double max() const {
        if (empty()) throw std::invalid_argument("Tensor::max: empty tensor");
        return *std::max_element(data_.begin(), data_.end());
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    Tensor transposed() const {
        Tensor t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    /// Rows selected by index, in order.
    Tensor rows_at(const std::vector<int>& idx) const {
        Tensor out(static_cast<int>(idx.size()), cols_);
        for (int i = 0; i < out.rows(); ++i) {
            if (idx[i] < 0 || idx[i] >= rows_)
                throw std::invalid_argument("Tensor::rows_at: index out of range");
            std::copy(data_.begin() + static_cast<std::size_t>(idx[i]) * cols_,
                      data_.begin() + static_cast<std::size_t>(idx[i] + 1) * cols_,
                      out.data_.begin() + static_cast<std::size_t>(i) * cols_);
        }
        return out;
    }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

using EigenRowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<EigenRowMat> as_eigen(Tensor& t) {
    return Eigen::Map<EigenRowMat>(t.data(), t.rows(), t.cols());
}

inline Eigen::Map<const EigenRowMat> as_eigen(const Tensor& t) {
    return Eigen::Map<const EigenRowMat>(t.data(), t.rows(), t.cols());
}

}  // namespace detail

/// C = A.B with shape checks; the one dense kernel everything leans on.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: inner dimensions disagree (" + a.shape_str() +
                                    " vs " + b.shape_str() + ")");
    Tensor c(a.rows(), b.cols());
    detail::as_eigen(c).noalias() = detail::as_eigen(a) * detail::as_eigen(b);
    return c;
}

/// Squared Euclidean distances between all row pairs, clamped at zero.
inline Tensor pairwise_sqdist(const Tensor& x, const Tensor& y) {
    if (x.cols() != y.cols())
        throw std::invalid_argument("pairwise_sqdist: dimension mismatch (" + x.shape_str() +
                                    " vs " + y.shape_str() + ")");
    const auto xm = detail::as_eigen(x);
    const auto ym = detail::as_eigen(y);
    Tensor d(x.rows(), y.rows());
    auto dm = detail::as_eigen(d);
    dm.noalias() = -2.0 * (xm * ym.transpose());
    dm.colwise() += xm.rowwise().squaredNorm();
    dm.rowwise() += ym.rowwise().squaredNorm().transpose();
    dm = dm.cwiseMax(0.0);
    return d;
}

/// log(sum_i exp(t_i)) over all entries, max-shifted so constant and huge
/// inputs stay exact/finite.
inline double logsumexp_value(const Tensor& t) {
    if (t.empty()) throw std::invalid_argument("logsumexp: empty tensor");
    const double m = t.max();
    if (!std::isfinite(m)) return m;  // all -inf or a +inf/nan entry dominates
    double s = 0.0;
    for (std::int64_t k = 0; k < t.size(); ++k) s += std::exp(t[k] - m);
    return m + std::log(s);
}

}  // namespace fwgan
