// Copyright 2026 the fwgan authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fwgan/tensor.hpp"

namespace fwgan {

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation record. A tape is built per minibatch
/// (define-by-run) and discarded; nodes are appended in topological order, so
/// every node's parents precede it. backward() accumulates gradients in
/// reverse node order, which makes it deterministic: the same tape always
/// produces bit-identical gradients.
///
/// Binary add/sub accept a second operand that is either the same shape, a
/// 1x1 scalar, or a 1xN row (bias broadcast over rows). Everything else is
/// shape-strict.
class Tape {
  public:
    enum class OpKind {
        Leaf,
        MatMul,
        Transpose,
        Add,
        Sub,
        Mul,
        Exp,
        Log,
        Relu,
        LeakyRelu,
        MaxScalar,
        Scale,
        Mean,
        Sum,
        LogSumExp,
    };

    /// Differentiable input (parameters, or anything a gradient is wanted for).
    Var leaf(Tensor value) { return push(OpKind::Leaf, -1, -1, 0.0, std::move(value), true); }

    /// Non-differentiable input (data batches, literal constants). Backward
    /// skips branches that reach only constants.
    Var constant(Tensor value) {
        return push(OpKind::Leaf, -1, -1, 0.0, std::move(value), false);
    }

    Var matmul(Var a, Var b) {
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        if (va.cols() != vb.rows())
            throw std::invalid_argument("Tape::matmul: inner dimensions disagree (" +
                                        va.shape_str() + " vs " + vb.shape_str() + ")");
        return push(OpKind::MatMul, a.id, b.id, 0.0, fwgan::matmul(va, vb));
    }

    Var transpose(Var a) { return push(OpKind::Transpose, a.id, -1, 0.0, value(a).transposed()); }

    Var add(Var a, Var b) { return binary(OpKind::Add, a, b); }
    Var sub(Var a, Var b) { return binary(OpKind::Sub, a, b); }

    Var mul(Var a, Var b) {
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        if (!va.same_shape(vb))
            throw std::invalid_argument("Tape::mul: shape mismatch (" + va.shape_str() + " vs " +
                                        vb.shape_str() + ")");
        Tensor out(va.rows(), va.cols());
        for (std::int64_t k = 0; k < out.size(); ++k) out[k] = va[k] * vb[k];
        return push(OpKind::Mul, a.id, b.id, 0.0, std::move(out));
    }

    Var exp(Var a) {
        const Tensor& va = value(a);
        Tensor out(va.rows(), va.cols());
        for (std::int64_t k = 0; k < out.size(); ++k) out[k] = std::exp(va[k]);
        return push(OpKind::Exp, a.id, -1, 0.0, std::move(out));
    }

    Var log(Var a) {
        const Tensor& va = value(a);
        Tensor out(va.rows(), va.cols());
        for (std::int64_t k = 0; k < out.size(); ++k) {
            if (!(va[k] > 0.0))
                throw std::domain_error("Tape::log: nonpositive entry " + std::to_string(va[k]));
            out[k] = std::log(va[k]);
        }
        return push(OpKind::Log, a.id, -1, 0.0, std::move(out));
    }

    Var relu(Var a) {
        const Tensor& va = value(a);
        Tensor out(va.rows(), va.cols());
        for (std::int64_t k = 0; k < out.size(); ++k) out[k] = va[k] > 0.0 ? va[k] : 0.0;
        return push(OpKind::Relu, a.id, -1, 0.0, std::move(out));
    }

    Var leaky_relu(Var a, double slope) {
        const Tensor& va = value(a);
        Tensor out(va.rows(), va.cols());
        for (std::int64_t k = 0; k < out.size(); ++k) out[k] = va[k] > 0.0 ? va[k] : slope * va[k];
        return push(OpKind::LeakyRelu, a.id, -1, slope, std::move(out));
    }

    /// max(x, c) elementwise; gradient passes only where x > c.
    Var max_scalar(Var a, double c) {
        const Tensor& va = value(a);
        Tensor out(va.rows(), va.cols());
        for (std::int64_t k = 0; k < out.size(); ++k) out[k] = va[k] > c ? va[k] : c;
        return push(OpKind::MaxScalar, a.id, -1, c, std::move(out));
    }

    Var scale(Var a, double s) {
        const Tensor& va = value(a);
        Tensor out(va.rows(), va.cols());
        for (std::int64_t k = 0; k < out.size(); ++k) out[k] = s * va[k];
        return push(OpKind::Scale, a.id, -1, s, std::move(out));
    }

    Var mean(Var a) {
        const Tensor& va = value(a);
        if (va.empty()) throw std::invalid_argument("Tape::mean: empty tensor");
        return push(OpKind::Mean, a.id, -1, 0.0, Tensor::scalar(va.mean()));
    }

    Var sum(Var a) {
        const Tensor& va = value(a);
        if (va.empty()) throw std::invalid_argument("Tape::sum: empty tensor");
        return push(OpKind::Sum, a.id, -1, 0.0, Tensor::scalar(va.sum()));
    }

    /// max-shifted log(sum exp); backward is the softmax of the input.
    Var logsumexp(Var a) {
        const Tensor& va = value(a);
        return push(OpKind::LogSumExp, a.id, -1, 0.0, Tensor::scalar(logsumexp_value(va)));
    }

    const Tensor& value(Var v) const { return node(v).value; }

    /// Gradient of the last backward() root with respect to node v. Zero
    /// tensor for nodes the root does not depend on.
    const Tensor& grad(Var v) const {
        const Node& n = node(v);
        if (grads_.size() != nodes_.size())
            throw std::logic_error("Tape::grad: call backward() first");
        if (!touched_[static_cast<std::size_t>(v.id)]) {
            const_cast<Tape*>(this)->zero_grad_slot(v.id);
        }
        (void)n;
        return grads_[static_cast<std::size_t>(v.id)];
    }

    /// Reverse accumulation from a scalar root. Leaf gradients equal the
    /// analytic total derivatives of root w.r.t. each leaf.
    void backward(Var root) {
        const Node& r = node(root);
        if (!r.value.is_scalar())
            throw std::invalid_argument("Tape::backward: root must be a 1x1 scalar, got " +
                                        r.value.shape_str());
        grads_.assign(nodes_.size(), Tensor());
        touched_.assign(nodes_.size(), 0);
        zero_grad_slot(root.id);
        grads_[static_cast<std::size_t>(root.id)][0] = 1.0;
        touched_[static_cast<std::size_t>(root.id)] = 1;

        for (int i = root.id; i >= 0; --i) {
            if (!touched_[static_cast<std::size_t>(i)]) continue;
            propagate(i);
        }
    }

    std::size_t size() const { return nodes_.size(); }

    void reserve(std::size_t n) { nodes_.reserve(n); }

  private:
    struct Node {
        OpKind kind;
        int a;
        int b;
        double param;
        Tensor value;
        bool needs_grad;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::vector<char> touched_;

    const Node& node(Var v) const {
        if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
            throw std::out_of_range("Tape: invalid Var");
        return nodes_[static_cast<std::size_t>(v.id)];
    }

    Var push(OpKind kind, int a, int b, double param, Tensor value, bool leaf_grad = false) {
        bool needs = leaf_grad;
        if (kind != OpKind::Leaf) {
            needs = (a >= 0 && nodes_[static_cast<std::size_t>(a)].needs_grad) ||
                    (b >= 0 && nodes_[static_cast<std::size_t>(b)].needs_grad);
        }
        nodes_.push_back(Node{kind, a, b, param, std::move(value), needs});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    enum class Broadcast { None, Scalar, Row };

    Broadcast classify(const Tensor& a, const Tensor& b, const char* op) const {
        if (a.same_shape(b)) return Broadcast::None;
        if (b.is_scalar()) return Broadcast::Scalar;
        if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::Row;
        throw std::invalid_argument(std::string("Tape::") + op + ": shape mismatch (" +
                                    a.shape_str() + " vs " + b.shape_str() + ")");
    }

    Var binary(OpKind kind, Var a, Var b) {
        const Tensor& va = value(a);
        const Tensor& vb = value(b);
        const Broadcast bc = classify(va, vb, kind == OpKind::Add ? "add" : "sub");
        const double sign = kind == OpKind::Add ? 1.0 : -1.0;
        Tensor out(va.rows(), va.cols());
        switch (bc) {
            case Broadcast::None:
                for (std::int64_t k = 0; k < out.size(); ++k) out[k] = va[k] + sign * vb[k];
                break;
            case Broadcast::Scalar:
                for (std::int64_t k = 0; k < out.size(); ++k) out[k] = va[k] + sign * vb[0];
                break;
            case Broadcast::Row:
                for (int i = 0; i < out.rows(); ++i)
                    for (int j = 0; j < out.cols(); ++j) out(i, j) = va(i, j) + sign * vb(0, j);
                break;
        }
        return push(kind, a.id, b.id, 0.0, std::move(out));
    }

    void zero_grad_slot(int id) {
        const Tensor& v = nodes_[static_cast<std::size_t>(id)].value;
        grads_[static_cast<std::size_t>(id)] = Tensor(v.rows(), v.cols());
    }

    Tensor& sink(int id) {
        if (!touched_[static_cast<std::size_t>(id)]) {
            zero_grad_slot(id);
            touched_[static_cast<std::size_t>(id)] = 1;
        }
        return grads_[static_cast<std::size_t>(id)];
    }

    bool wants(int id) const { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; }

    void propagate(int i) {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        const Tensor& g = grads_[static_cast<std::size_t>(i)];
        switch (n.kind) {
            case OpKind::Leaf:
                break;
            case OpKind::MatMul: {
                const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& vb = nodes_[static_cast<std::size_t>(n.b)].value;
                if (wants(n.a))
                    detail::as_eigen(sink(n.a)).noalias() +=
                        detail::as_eigen(g) * detail::as_eigen(vb).transpose();
                if (wants(n.b))
                    detail::as_eigen(sink(n.b)).noalias() +=
                        detail::as_eigen(va).transpose() * detail::as_eigen(g);
                break;
            }
            case OpKind::Transpose:
                if (wants(n.a)) {
                    Tensor& d = sink(n.a);
                    for (int r = 0; r < g.rows(); ++r)
                        for (int c = 0; c < g.cols(); ++c) d(c, r) += g(r, c);
                }
                break;
            case OpKind::Add:
            case OpKind::Sub: {
                const double sign = n.kind == OpKind::Add ? 1.0 : -1.0;
                if (wants(n.a)) {
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < g.size(); ++k) d[k] += g[k];
                }
                if (wants(n.b)) {
                    const Tensor& vb = nodes_[static_cast<std::size_t>(n.b)].value;
                    Tensor& d = sink(n.b);
                    const Broadcast bc =
                        classify(nodes_[static_cast<std::size_t>(n.a)].value, vb, "backward");
                    switch (bc) {
                        case Broadcast::None:
                            for (std::int64_t k = 0; k < g.size(); ++k) d[k] += sign * g[k];
                            break;
                        case Broadcast::Scalar:
                            d[0] += sign * g.sum();
                            break;
                        case Broadcast::Row:
                            for (int r = 0; r < g.rows(); ++r)
                                for (int c = 0; c < g.cols(); ++c) d(0, c) += sign * g(r, c);
                            break;
                    }
                }
                break;
            }
            case OpKind::Mul: {
                const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& vb = nodes_[static_cast<std::size_t>(n.b)].value;
                if (wants(n.a)) {
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < g.size(); ++k) d[k] += g[k] * vb[k];
                }
                if (wants(n.b)) {
                    Tensor& d = sink(n.b);
                    for (std::int64_t k = 0; k < g.size(); ++k) d[k] += g[k] * va[k];
                }
                break;
            }
            case OpKind::Exp:
                if (wants(n.a)) {
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < g.size(); ++k) d[k] += g[k] * n.value[k];
                }
                break;
            case OpKind::Log:
                if (wants(n.a)) {
                    const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < g.size(); ++k) d[k] += g[k] / va[k];
                }
                break;
            case OpKind::Relu:
                if (wants(n.a)) {
                    const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < g.size(); ++k)
                        if (va[k] > 0.0) d[k] += g[k];
                }
                break;
            case OpKind::LeakyRelu:
                if (wants(n.a)) {
                    const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < g.size(); ++k)
                        d[k] += g[k] * (va[k] > 0.0 ? 1.0 : n.param);
                }
                break;
            case OpKind::MaxScalar:
                if (wants(n.a)) {
                    const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < g.size(); ++k)
                        if (va[k] > n.param) d[k] += g[k];
                }
                break;
            case OpKind::Scale:
                if (wants(n.a)) {
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < g.size(); ++k) d[k] += g[k] * n.param;
                }
                break;
            case OpKind::Mean:
                if (wants(n.a)) {
                    Tensor& d = sink(n.a);
                    const double w = g[0] / static_cast<double>(d.size());
                    for (std::int64_t k = 0; k < d.size(); ++k) d[k] += w;
                }
                break;
            case OpKind::Sum:
                if (wants(n.a)) {
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < d.size(); ++k) d[k] += g[0];
                }
                break;
            case OpKind::LogSumExp:
                if (wants(n.a)) {
                    const Tensor& va = nodes_[static_cast<std::size_t>(n.a)].value;
                    const double lse = n.value[0];
                    Tensor& d = sink(n.a);
                    for (std::int64_t k = 0; k < d.size(); ++k)
                        d[k] += g[0] * std::exp(va[k] - lse);
                }
                break;
        }
    }
};

}  // namespace fwgan
