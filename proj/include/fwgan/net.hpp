// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fwgan/autodiff.hpp"
#include "fwgan/rng.hpp"
#include "fwgan/tensor.hpp"

namespace fwgan {

/// Persistent power-iteration state for a spectrally normalized weight.
struct SpectralState {
    Tensor u;          // out x 1, approximate left singular vector
    double sigma = 1.0;  // cached estimate from the latest iteration
    int n_iters = 1;     // iterations per Update-mode forward
};

enum class SpectralMode {
    Update,  // run power iteration, refresh u and the sigma cache
    Frozen,  // reuse the cached sigma; u untouched
};

/// One round of power iteration per `iters`: v <- normalize(W^T u),
/// u <- normalize(W v), returning sigma = ||W^T u||. Near-zero vectors skip
/// the normalization (and leave u as-is), and sigma is floored at 1e-12 so a
/// zero weight never divides by zero.
inline double power_iterate(const Tensor& w, Tensor& u, int iters) {
    if (u.rows() != w.rows() || u.cols() != 1)
        throw std::invalid_argument("power_iterate: u must be " + std::to_string(w.rows()) +
                                    "x1, got " + u.shape_str());
    if (iters < 1) throw std::invalid_argument("power_iterate: iters must be >= 1");
    const double eps = 1e-12;
    auto wm = detail::as_eigen(w);
    Eigen::VectorXd uv = detail::as_eigen(u).col(0);
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd v = wm.transpose() * uv;
        const double nv = v.norm();
        if (nv <= eps) break;
        v /= nv;
        Eigen::VectorXd un = wm * v;
        const double nu = un.norm();
        if (nu <= eps) break;
        uv = un / nu;
    }
    detail::as_eigen(u).col(0) = uv;
    const double sigma = (wm.transpose() * uv).norm();
    return sigma > eps ? sigma : eps;
}

/// Affine layer y = x W^T + b with optional spectral normalization of W.
struct DenseLayer {
    Tensor weight;  // out x in
    Tensor bias;    // out x 1
    std::optional<SpectralState> spectral;

    int in_dim() const { return weight.cols(); }
    int out_dim() const { return weight.rows(); }

    /// Effective sigma for this forward; Update mode refreshes the cache.
    double spectral_sigma(SpectralMode mode) {
        if (!spectral) return 1.0;
        if (mode == SpectralMode::Update)
            spectral->sigma = power_iterate(weight, spectral->u, spectral->n_iters);
        return spectral->sigma;
    }
};

/// Parameter handles for one network staged onto a tape, in the canonical
/// order W0, b0, W1, b1, ...
struct StagedParams {
    std::vector<Var> vars;
};

/// Fully connected network with LeakyReLU between layers and a linear output.
class Mlp {
  public:
    std::vector<DenseLayer> layers;
    double leaky_slope = 0.2;

    /// Mutable views of the parameters in canonical order (matches
    /// StagedParams::vars and optimizer slot order).
    std::vector<Tensor*> params() {
        std::vector<Tensor*> out;
        out.reserve(layers.size() * 2);
        for (auto& l : layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }

    std::vector<const Tensor*> params() const {
        std::vector<const Tensor*> out;
        out.reserve(layers.size() * 2);
        for (const auto& l : layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
        return out;
    }

    int in_dim() const { return layers.front().in_dim(); }
    int out_dim() const { return layers.back().out_dim(); }

    StagedParams stage_params(Tape& tape) const {
        StagedParams sp;
        sp.vars.reserve(layers.size() * 2);
        for (const auto& l : layers) {
            sp.vars.push_back(tape.leaf(l.weight));
            sp.vars.push_back(tape.leaf(l.bias));
        }
        return sp;
    }

    /// Differentiable forward pass for a batch x (m x in_dim). Spectral
    /// normalization divides W by sigma with sigma treated as a constant, so
    /// gradients see the 1/sigma scale but not d(sigma)/dW.
    Var forward_staged(Tape& tape, const StagedParams& sp, Var x, SpectralMode mode) {
        check_input(tape.value(x));
        Var h = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Var w = sp.vars[2 * i];
            Var b = sp.vars[2 * i + 1];
            const double sigma = layers[i].spectral_sigma(mode);
            Var w_eff = layers[i].spectral ? tape.scale(w, 1.0 / sigma) : w;
            h = tape.add(tape.matmul(h, tape.transpose(w_eff)), tape.transpose(b));
            if (i + 1 < layers.size()) h = tape.leaky_relu(h, leaky_slope);
        }
        return h;
    }

    /// Plain forward pass, no tape. Frozen mode by default so evaluation never
    /// perturbs the power-iteration state.
    Tensor forward_eval(const Tensor& x, SpectralMode mode = SpectralMode::Frozen) {
        check_input(x);
        Tensor h = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            DenseLayer& l = layers[i];
            const double inv_sigma = 1.0 / l.spectral_sigma(mode);
            Tensor out(h.rows(), l.out_dim());
            detail::as_eigen(out).noalias() =
                detail::as_eigen(h) * (detail::as_eigen(l.weight).transpose() * inv_sigma);
            for (int r = 0; r < out.rows(); ++r)
                for (int c = 0; c < out.cols(); ++c) out(r, c) += l.bias(c, 0);
            if (i + 1 < layers.size())
                for (std::int64_t k = 0; k < out.size(); ++k)
                    if (out[k] < 0.0) out[k] *= leaky_slope;
            h = std::move(out);
        }
        return h;
    }

  private:
    void check_input(const Tensor& x) const {
        if (layers.empty()) throw std::logic_error("Mlp: no layers");
        if (x.cols() != in_dim())
            throw std::invalid_argument("Mlp: input has " + std::to_string(x.cols()) +
                                        " columns, expected " + std::to_string(in_dim()));
    }
};

/// Uninitialized network with the requested topology; call init_params next.
inline Mlp make_mlp(int in_dim, const std::vector<int>& hidden, int out_dim, double leaky_slope,
                    bool spectral, int sn_iters = 1) {
    if (in_dim < 1 || out_dim < 1) throw std::invalid_argument("make_mlp: bad dimensions");
    for (int h : hidden)
        if (h < 1) throw std::invalid_argument("make_mlp: bad hidden width");
    Mlp net;
    net.leaky_slope = leaky_slope;
    std::vector<int> dims;
    dims.push_back(in_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out_dim);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        DenseLayer l;
        l.weight = Tensor(dims[i + 1], dims[i]);
        l.bias = Tensor(dims[i + 1], 1);
        if (spectral) {
            l.spectral = SpectralState{};
            l.spectral->u = Tensor(dims[i + 1], 1);
            l.spectral->u(0, 0) = 1.0;  // deterministic basis vector until init
            l.spectral->n_iters = sn_iters;
        }
        net.layers.push_back(std::move(l));
    }
    return net;
}

/// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out)), optionally scaled),
/// zero biases. Draw order per layer: weight entries row-major, then the
/// power-iteration vector u (standard normal, normalized), whose sigma cache
/// is seeded immediately.
inline void init_params(Mlp& net, RngStream& rng, double weight_scale = 1.0) {
    for (auto& l : net.layers) {
        const double fan_in = static_cast<double>(l.in_dim());
        const double fan_out = static_cast<double>(l.out_dim());
        const double bound = std::sqrt(6.0 / (fan_in + fan_out)) * weight_scale;
        for (std::int64_t k = 0; k < l.weight.size(); ++k) l.weight[k] = rng.uniform(-bound, bound);
        for (std::int64_t k = 0; k < l.bias.size(); ++k) l.bias[k] = 0.0;
        if (l.spectral) {
            Tensor u = rng.normal_tensor(l.out_dim(), 1);
            double norm = 0.0;
            for (std::int64_t k = 0; k < u.size(); ++k) norm += u[k] * u[k];
            norm = std::sqrt(norm);
            if (norm > 1e-12)
                for (std::int64_t k = 0; k < u.size(); ++k) u[k] /= norm;
            else
                u[0] = 1.0;
            l.spectral->u = std::move(u);
            l.spectral->sigma = power_iterate(l.weight, l.spectral->u, l.spectral->n_iters);
        }
    }
}

/// m x dim batch of standard normal latents.
inline Tensor sample_latent(int m, int dim, RngStream& rng) {
    if (m < 1 || dim < 1) throw std::invalid_argument("sample_latent: bad shape");
    return rng.normal_tensor(m, dim);
}

/// RMSProp with the usual accumulator update
/// acc <- rho*acc + (1-rho)*g^2, p <- p - lr * g / (sqrt(acc) + eps).
class RmsProp {
  public:
    RmsProp(double lr, double rho = 0.9, double eps = 1e-8) : lr_(lr), rho_(rho), eps_(eps) {
        if (!(lr > 0.0)) throw std::invalid_argument("RmsProp: lr must be positive");
        if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("RmsProp: rho in [0,1)");
        if (!(eps > 0.0)) throw std::invalid_argument("RmsProp: eps must be positive");
    }

    double lr() const { return lr_; }
    double rho() const { return rho_; }
    double eps() const { return eps_; }

    std::vector<Tensor>& accumulators() { return acc_; }
    const std::vector<Tensor>& accumulators() const { return acc_; }

    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
        if (params.size() != grads.size())
            throw std::invalid_argument("RmsProp::step: params/grads size mismatch");
        if (acc_.empty()) {
            acc_.reserve(params.size());
            for (const Tensor* p : params) acc_.emplace_back(p->rows(), p->cols());
        }
        if (acc_.size() != params.size())
            throw std::invalid_argument("RmsProp::step: accumulator count mismatch");
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& p = *params[i];
            const Tensor& g = grads[i];
            Tensor& a = acc_[i];
            if (!p.same_shape(g) || !p.same_shape(a))
                throw std::invalid_argument("RmsProp::step: shape mismatch at slot " +
                                            std::to_string(i));
            for (std::int64_t k = 0; k < p.size(); ++k) {
                a[k] = rho_ * a[k] + (1.0 - rho_) * g[k] * g[k];
                p[k] -= lr_ * g[k] / (std::sqrt(a[k]) + eps_);
            }
        }
    }

  private:
    double lr_;
    double rho_;
    double eps_;
    std::vector<Tensor> acc_;
};

}  // namespace fwgan
