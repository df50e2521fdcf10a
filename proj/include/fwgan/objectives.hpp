// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwgan/autodiff.hpp"
#include "fwgan/errors.hpp"
#include "fwgan/tensor.hpp"

namespace fwgan {

enum class Divergence { KL, ChiSq };

inline Divergence divergence_from_string(const std::string& s) {
    if (s == "kl") return Divergence::KL;
    if (s == "chi2") return Divergence::ChiSq;
    throw config_error("unknown divergence '" + s + "' (expected kl or chi2)");
}

inline std::string to_string(Divergence d) { return d == Divergence::KL ? "kl" : "chi2"; }

/// Convex generator f of an f-divergence, with f(1) = 0, together with its
/// derivative, inverse derivative, and Fenchel conjugate f*(t) = sup_u ut-f(u).
class FGenerator {
  public:
    static FGenerator kl() { return FGenerator(Divergence::KL); }
    static FGenerator chi2() { return FGenerator(Divergence::ChiSq); }
    explicit FGenerator(Divergence d) : kind_(d) {}

    Divergence kind() const { return kind_; }

    /// KL: u log u (0 at u=0); chi-squared: (u-1)^2.
    double f(double u) const {
        if (u < 0.0) throw std::domain_error("FGenerator::f: negative argument");
        if (kind_ == Divergence::KL) return u == 0.0 ? 0.0 : u * std::log(u);
        return (u - 1.0) * (u - 1.0);
    }

    double f_prime(double u) const {
        if (kind_ == Divergence::KL) {
            if (u <= 0.0) throw std::domain_error("FGenerator::f_prime: KL needs u > 0");
            return std::log(u) + 1.0;
        }
        if (u < 0.0) throw std::domain_error("FGenerator::f_prime: negative argument");
        return 2.0 * (u - 1.0);
    }

    double f_prime_inv(double t) const {
        if (kind_ == Divergence::KL) return std::exp(t - 1.0);
        return 1.0 + 0.5 * t;
    }

    /// KL: exp(t-1). chi-squared: t + t^2/4 on t >= -2 and the constant -1
    /// below it (the supremum is attained on the boundary u = 0 there).
    double conjugate(double t) const {
        if (kind_ == Divergence::KL) return std::exp(t - 1.0);
        if (t >= -2.0) return t + 0.25 * t * t;
        return -1.0;
    }

  private:
    Divergence kind_;
};

/// Normalized nonnegative importance weights for one batch: every entry is
/// >= 0 and the mean is 1 (within 1e-9), mirroring E_Q[r] = 1.
struct WeightBatch {
    Tensor r;

    explicit WeightBatch(Tensor values) : r(std::move(values)) {
        if (r.empty()) throw std::invalid_argument("WeightBatch: empty");
        for (std::int64_t k = 0; k < r.size(); ++k)
            if (!(r[k] >= 0.0))
                throw std::invalid_argument("WeightBatch: negative weight " +
                                            std::to_string(r[k]));
        const double m = r.mean();
        if (std::abs(m - 1.0) > 1e-9)
            throw std::invalid_argument("WeightBatch: mean " + std::to_string(m) + " != 1");
    }
};

namespace detail {

inline void check_nonempty(const Tensor& t, const char* what) {
    if (t.empty()) throw std::invalid_argument(std::string(what) + ": empty batch");
}

inline void check_same_size(const Tensor& a, const Tensor& b, const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(what) + ": size mismatch (" + a.shape_str() +
                                    " vs " + b.shape_str() + ")");
}

}  // namespace detail

/// Generalized critic objective
///   ell_f(T, r) = E_Q[f(r)] + E_P[T] - E_Q[r T],
/// with expectations as batch means; t_p holds critic values on real samples,
/// t_q on generated ones, r the per-sample weights aligned with t_q.
inline double ell_f(const FGenerator& f, const Tensor& t_p, const Tensor& t_q, const Tensor& r) {
    detail::check_nonempty(t_p, "ell_f(t_p)");
    detail::check_nonempty(t_q, "ell_f(t_q)");
    detail::check_same_size(t_q, r, "ell_f(r)");
    double acc = 0.0;
    for (std::int64_t k = 0; k < t_q.size(); ++k) acc += f.f(r[k]) - r[k] * t_q[k];
    return acc / static_cast<double>(t_q.size()) + t_p.mean();
}

inline double ell_f(const FGenerator& f, const Tensor& t_p, const Tensor& t_q,
                    const WeightBatch& r) {
    return ell_f(f, t_p, t_q, r.r);
}

/// Closed-form inner minimizer of ell_f for KL over the scaled simplex
/// {r >= 0, sum r = m}: r_i = m * softmax(t_i / temp). Computed max-shifted;
/// a constant batch yields exactly unit weights.
inline WeightBatch kl_weights(const Tensor& t, double temp = 1.0) {
    detail::check_nonempty(t, "kl_weights");
    if (!(temp > 0.0)) throw std::invalid_argument("kl_weights: temp must be positive");
    const std::int64_t m = t.size();
    Tensor e(t.rows(), t.cols());
    double vmax = -std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < m; ++k) vmax = std::max(vmax, t[k] / temp);
    double sum = 0.0;
    for (std::int64_t k = 0; k < m; ++k) {
        e[k] = std::exp(t[k] / temp - vmax);
        sum += e[k];
    }
    const double scale = static_cast<double>(m) / sum;
    for (std::int64_t k = 0; k < m; ++k) e[k] *= scale;
    return WeightBatch(std::move(e));
}

/// Smallest clamp level c such that r_i = (max(t_i,c) - mean(max(t,c)) + 2)/2
/// is nonnegative for every i; -inf if the unclamped weights already are.
/// Monotone piecewise-linear root find over the sorted batch (exact KKT
/// solution of the chi-squared simplex program).
inline double chi2_minimal_clamp(const Tensor& t) {
    detail::check_nonempty(t, "chi2_minimal_clamp");
    const std::int64_t m = t.size();
    double mean = t.mean();
    double tmin = t.min();
    if (tmin - mean + 2.0 >= 0.0) return -std::numeric_limits<double>::infinity();
    std::vector<double> s(t.values().begin(), t.values().end());
    std::sort(s.begin(), s.end());
    // suffix[k] = sum of the m-k largest entries
    double suffix = 0.0;
    for (double v : s) suffix += v;
    for (std::int64_t k = 1; k < m; ++k) {
        suffix -= s[static_cast<std::size_t>(k - 1)];
        const double c =
            (suffix - 2.0 * static_cast<double>(m)) / static_cast<double>(m - k);
        const double lo = s[static_cast<std::size_t>(k - 1)];
        const double hi = s[static_cast<std::size_t>(k)];
        if (c >= lo && c <= hi) return c;
    }
    // All entries clamped: any common level gives unit weights; use the max.
    return s.back();
}

/// Closed-form inner minimizer of ell_f for chi-squared over the scaled
/// simplex: r_i = (that_i - mean(that) + 2)/2 with that = max(t/temp, c) at
/// the minimal feasible clamp. A final max(.,0) guards roundoff; no
/// renormalization is applied.
inline WeightBatch chi2_weights(const Tensor& t, double temp = 1.0) {
    detail::check_nonempty(t, "chi2_weights");
    if (!(temp > 0.0)) throw std::invalid_argument("chi2_weights: temp must be positive");
    Tensor v(t.rows(), t.cols());
    for (std::int64_t k = 0; k < t.size(); ++k) v[k] = t[k] / temp;
    const double c = chi2_minimal_clamp(v);
    Tensor that(v.rows(), v.cols());
    for (std::int64_t k = 0; k < v.size(); ++k) that[k] = std::max(v[k], c);
    const double mean = that.mean();
    for (std::int64_t k = 0; k < that.size(); ++k)
        that[k] = std::max(0.5 * (that[k] - mean + 2.0), 0.0);
    return WeightBatch(std::move(that));
}

/// Variational (NWJ) lower bound E_P[T] - E_Q[f*(T)]. In strict mode the
/// chi-squared conjugate rejects inputs below -2 instead of flattening them.
inline double estimator_nwj(const FGenerator& f, const Tensor& t_p, const Tensor& t_q,
                            bool strict = false) {
    detail::check_nonempty(t_p, "estimator_nwj(t_p)");
    detail::check_nonempty(t_q, "estimator_nwj(t_q)");
    double acc = 0.0;
    for (std::int64_t k = 0; k < t_q.size(); ++k) {
        if (strict && f.kind() == Divergence::ChiSq && t_q[k] < -2.0)
            throw std::domain_error("estimator_nwj: critic value " + std::to_string(t_q[k]) +
                                    " below -2 in strict chi2 mode");
        acc += f.conjugate(t_q[k]);
    }
    return t_p.mean() - acc / static_cast<double>(t_q.size());
}

/// IPM difference of means E_P[T] - E_Q[T].
inline double estimator_ipm(const Tensor& t_p, const Tensor& t_q) {
    detail::check_nonempty(t_p, "estimator_ipm(t_p)");
    detail::check_nonempty(t_q, "estimator_ipm(t_q)");
    return t_p.mean() - t_q.mean();
}

/// Donsker-Varadhan bound E_P[T] - log E_Q[e^T], stabilized via logsumexp.
inline double estimator_dv(const Tensor& t_p, const Tensor& t_q) {
    detail::check_nonempty(t_p, "estimator_dv(t_p)");
    detail::check_nonempty(t_q, "estimator_dv(t_q)");
    return t_p.mean() - (logsumexp_value(t_q) - std::log(static_cast<double>(t_q.size())));
}

/// Inner feasible set for the weights r in ell_f.
enum class ConstraintSet {
    Singleton1,    // r = 1: recovers the IPM estimator
    SimplexDelta,  // r >= 0, mean 1: the importance-weighting family
    AllNonneg,     // r >= 0 unconstrained in mean: recovers the NWJ bound
};

inline ConstraintSet constraint_from_string(const std::string& s) {
    if (s == "singleton") return ConstraintSet::Singleton1;
    if (s == "simplex") return ConstraintSet::SimplexDelta;
    if (s == "nonneg") return ConstraintSet::AllNonneg;
    throw config_error("unknown constraint set '" + s +
                       "' (expected singleton, simplex, or nonneg)");
}

/// inf_{r in R} ell_f(T, r) for the requested feasible set, using the
/// closed-form minimizers (simplex weights for KL/chi2; the pointwise
/// max(0, (f')^{-1}(T)) for the unconstrained nonnegative cone).
inline double lr_objective(const FGenerator& f, ConstraintSet set, const Tensor& t_p,
                           const Tensor& t_q, double temp = 1.0) {
    switch (set) {
        case ConstraintSet::Singleton1:
            return ell_f(f, t_p, t_q, Tensor::full(t_q.rows(), t_q.cols(), 1.0));
        case ConstraintSet::SimplexDelta: {
            const WeightBatch w =
                f.kind() == Divergence::KL ? kl_weights(t_q, temp) : chi2_weights(t_q, temp);
            return ell_f(f, t_p, t_q, w);
        }
        case ConstraintSet::AllNonneg: {
            detail::check_nonempty(t_q, "lr_objective(t_q)");
            Tensor r(t_q.rows(), t_q.cols());
            for (std::int64_t k = 0; k < t_q.size(); ++k)
                r[k] = std::max(0.0, f.f_prime_inv(t_q[k] / temp));
            return ell_f(f, t_p, t_q, r);
        }
    }
    throw std::logic_error("lr_objective: unreachable");
}

/// Euclidean projection onto {r >= 0, sum r = total} (sort-based).
inline Tensor project_simplex_scaled(const Tensor& y, double total) {
    detail::check_nonempty(y, "project_simplex_scaled");
    if (!(total > 0.0)) throw std::invalid_argument("project_simplex_scaled: total must be > 0");
    const std::int64_t m = y.size();
    std::vector<double> u(y.values().begin(), y.values().end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cum = 0.0;
    double lambda = 0.0;
    for (std::int64_t j = 1; j <= m; ++j) {
        cum += u[static_cast<std::size_t>(j - 1)];
        const double cand = (total - cum) / static_cast<double>(j);
        if (u[static_cast<std::size_t>(j - 1)] + cand > 0.0) lambda = cand;
    }
    Tensor out(y.rows(), y.cols());
    for (std::int64_t k = 0; k < m; ++k) out[k] = std::max(y[k] + lambda, 0.0);
    return out;
}

struct SimplexOracleResult {
    Tensor r;      // minimizer over {r >= 0, sum r = m}
    double value;  // ell_f at the minimizer
    int iters;     // projected-gradient iterations used
};

/// Numerical inner minimization of ell_f over the scaled simplex by projected
/// gradient descent with backtracking, independent of the closed forms (used
/// as their cross-check). Throws numerical_error when it fails to converge.
inline SimplexOracleResult simplex_inner_min_oracle(const FGenerator& f, const Tensor& t_p,
                                                    const Tensor& t_q, int max_iters = 20000,
                                                    double step0 = 1.0, double tol = 1e-12) {
    detail::check_nonempty(t_q, "simplex_inner_min_oracle");
    const std::int64_t m = t_q.size();
    const double md = static_cast<double>(m);
    const double floor = 1e-10;  // keeps the KL gradient finite at the boundary

    auto inner = [&](const Tensor& r) {
        double acc = 0.0;
        for (std::int64_t k = 0; k < m; ++k) acc += f.f(r[k]) - r[k] * t_q[k];
        return acc / md;
    };

    Tensor r = Tensor::full(t_q.rows(), t_q.cols(), 1.0);
    double h = inner(r);
    double step = step0;
    int it = 0;
    for (; it < max_iters; ++it) {
        Tensor g(r.rows(), r.cols());
        for (std::int64_t k = 0; k < m; ++k)
            g[k] = (f.f_prime(std::max(r[k], floor)) - t_q[k]) / md;
        Tensor r_new = r;
        double h_new = h;
        bool accepted = false;
        for (int bt = 0; bt < 80; ++bt) {
            Tensor cand(r.rows(), r.cols());
            for (std::int64_t k = 0; k < m; ++k) cand[k] = r[k] - step * g[k];
            cand = project_simplex_scaled(cand, md);
            const double hc = inner(cand);
            double lin = 0.0, quad = 0.0;
            for (std::int64_t k = 0; k < m; ++k) {
                const double d = cand[k] - r[k];
                lin += g[k] * d;
                quad += d * d;
            }
            if (hc <= h + lin + quad / (2.0 * step) + 1e-15) {
                r_new = std::move(cand);
                h_new = hc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw numerical_error("simplex_inner_min_oracle: backtracking stalled at iter " +
                                  std::to_string(it));
        double move = 0.0;
        for (std::int64_t k = 0; k < m; ++k) move = std::max(move, std::abs(r_new[k] - r[k]));
        r = std::move(r_new);
        h = h_new;
        if (move <= tol) break;
        step = std::min(step * 1.1, 1e6);
    }
    if (it >= max_iters)
        throw numerical_error("simplex_inner_min_oracle: no convergence in " +
                              std::to_string(max_iters) + " iterations");
    return SimplexOracleResult{std::move(r), h + t_p.mean(), it + 1};
}

/// D_f(P||Q) = sum_i q_i f(p_i/q_i) for finite distributions. Entries with
/// q_i = 0 require p_i = 0 (0 * f(0/0) = 0); otherwise P is not absolutely
/// continuous w.r.t. Q and the divergence is undefined here.
inline double f_divergence_discrete(const FGenerator& f, const std::vector<double>& p,
                                    const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty())
        throw std::invalid_argument("f_divergence_discrete: distributions must match and be "
                                    "nonempty");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0)
            throw std::invalid_argument("f_divergence_discrete: negative probability");
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw std::invalid_argument("f_divergence_discrete: distributions must sum to 1");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (q[i] == 0.0) {
            if (p[i] > 0.0)
                throw std::domain_error("f_divergence_discrete: P not absolutely continuous "
                                        "w.r.t. Q at index " +
                                        std::to_string(i));
            continue;
        }
        acc += q[i] * f.f(p[i] / q[i]);
    }
    return acc;
}

enum class LossVariant { Wgan, Klwgan, FganKl };

inline LossVariant loss_variant_from_string(const std::string& s) {
    if (s == "wgan") return LossVariant::Wgan;
    if (s == "klwgan") return LossVariant::Klwgan;
    if (s == "fgan_kl") return LossVariant::FganKl;
    throw config_error("unknown loss variant '" + s + "' (expected wgan, klwgan, or fgan_kl)");
}

inline std::string to_string(LossVariant v) {
    switch (v) {
        case LossVariant::Wgan: return "wgan";
        case LossVariant::Klwgan: return "klwgan";
        case LossVariant::FganKl: return "fgan_kl";
    }
    throw std::logic_error("to_string(LossVariant): unreachable");
}

struct HingeLossParts {
    double real;
    double fake;
    double total;
};

/// Hinge critic loss, value only:
///   real = mean(relu(1 - T_P)),  fake = mean(relu(1 + w * T_Q)),
/// with w = 1 (wgan) or the KL simplex weights of T_Q/temp (klwgan).
inline HingeLossParts critic_loss(LossVariant variant, const Tensor& t_p, const Tensor& t_q,
                                  double temp = 1.0) {
    if (variant == LossVariant::FganKl)
        throw std::invalid_argument("critic_loss: fgan_kl has no hinge decomposition");
    detail::check_nonempty(t_p, "critic_loss(t_p)");
    detail::check_nonempty(t_q, "critic_loss(t_q)");
    double real = 0.0;
    for (std::int64_t k = 0; k < t_p.size(); ++k) real += std::max(0.0, 1.0 - t_p[k]);
    real /= static_cast<double>(t_p.size());
    Tensor w = variant == LossVariant::Klwgan ? kl_weights(t_q, temp).r
                                              : Tensor::full(t_q.rows(), t_q.cols(), 1.0);
    double fake = 0.0;
    for (std::int64_t k = 0; k < t_q.size(); ++k) fake += std::max(0.0, 1.0 + w[k] * t_q[k]);
    fake /= static_cast<double>(t_q.size());
    return HingeLossParts{real, fake, real + fake};
}

/// Generator loss, value only: -mean(w * T_Q) with the same weights as the
/// critic's fake term.
inline double gen_loss(LossVariant variant, const Tensor& t_q, double temp = 1.0) {
    if (variant == LossVariant::FganKl)
        throw std::invalid_argument("gen_loss: fgan_kl handled by the tape path");
    detail::check_nonempty(t_q, "gen_loss");
    Tensor w = variant == LossVariant::Klwgan ? kl_weights(t_q, temp).r
                                              : Tensor::full(t_q.rows(), t_q.cols(), 1.0);
    double acc = 0.0;
    for (std::int64_t k = 0; k < t_q.size(); ++k) acc += w[k] * t_q[k];
    return -acc / static_cast<double>(t_q.size());
}

/// Options for the differentiable losses. stop_grad_weights detaches the KL
/// weights (ablation); force_unit_weights replaces them with exact ones, which
/// must reproduce the wgan loss bit for bit.
struct LossOptions {
    double temp = 1.0;
    bool stop_grad_weights = false;
    bool force_unit_weights = false;
};

namespace detail {

/// Weights for the klwgan loss on tape: w = m * softmax(T_Q / temp). Gradients
/// flow through the softmax unless detached.
inline Var tape_kl_weights(Tape& tape, Var t_q, const LossOptions& opt) {
    if (opt.force_unit_weights) {
        const Tensor& v = tape.value(t_q);
        return tape.constant(Tensor::full(v.rows(), v.cols(), 1.0));
    }
    if (opt.stop_grad_weights) return tape.constant(kl_weights(tape.value(t_q), opt.temp).r);
    Var v = opt.temp == 1.0 ? t_q : tape.scale(t_q, 1.0 / opt.temp);
    Var lse = tape.logsumexp(v);
    return tape.scale(tape.exp(tape.sub(v, lse)), static_cast<double>(tape.value(t_q).size()));
}

}  // namespace detail

struct HingeLossVars {
    Var real;
    Var fake;
    Var total;
};

/// Differentiable critic loss. wgan/klwgan use the hinge form of critic_loss;
/// fgan_kl uses mean(exp(T_Q - 1)) - mean(T_P) with real = -mean(T_P) and
/// fake = mean(exp(T_Q - 1)).
inline HingeLossVars critic_loss_tape(Tape& tape, LossVariant variant, Var t_p, Var t_q,
                                      const LossOptions& opt = {}) {
    const Tensor& vp = tape.value(t_p);
    const Tensor& vq = tape.value(t_q);
    detail::check_nonempty(vp, "critic_loss_tape(t_p)");
    detail::check_nonempty(vq, "critic_loss_tape(t_q)");
    if (variant == LossVariant::FganKl) {
        Var one = tape.constant(Tensor::scalar(1.0));
        Var fake = tape.mean(tape.exp(tape.sub(t_q, one)));
        Var real = tape.scale(tape.mean(t_p), -1.0);
        return HingeLossVars{real, fake, tape.add(real, fake)};
    }
    Var ones_p = tape.constant(Tensor::full(vp.rows(), vp.cols(), 1.0));
    Var real = tape.mean(tape.relu(tape.sub(ones_p, t_p)));
    Var w = variant == LossVariant::Klwgan
                ? detail::tape_kl_weights(tape, t_q, opt)
                : tape.constant(Tensor::full(vq.rows(), vq.cols(), 1.0));
    Var ones_q = tape.constant(Tensor::full(vq.rows(), vq.cols(), 1.0));
    Var fake = tape.mean(tape.relu(tape.add(ones_q, tape.mul(w, t_q))));
    return HingeLossVars{real, fake, tape.add(real, fake)};
}

/// Differentiable generator loss: -mean(w * T_Q) for wgan/klwgan,
/// -mean(exp(T_Q - 1)) for fgan_kl.
inline Var generator_loss_tape(Tape& tape, LossVariant variant, Var t_q,
                               const LossOptions& opt = {}) {
    const Tensor& vq = tape.value(t_q);
    detail::check_nonempty(vq, "generator_loss_tape");
    if (variant == LossVariant::FganKl) {
        Var one = tape.constant(Tensor::scalar(1.0));
        return tape.scale(tape.mean(tape.exp(tape.sub(t_q, one))), -1.0);
    }
    if (variant == LossVariant::Wgan) return tape.scale(tape.mean(t_q), -1.0);
    Var w = detail::tape_kl_weights(tape, t_q, opt);
    return tape.scale(tape.mean(tape.mul(w, t_q)), -1.0);
}

}  // namespace fwgan
