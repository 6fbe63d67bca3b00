#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "iprnet/core/tensor.hpp"

namespace iprnet {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad; // allocated on first use, same shape as value
    bool requires_grad = false;
    bool grad_ready = false;
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward; // pulls this->grad, pushes into parents

    Tensor& ensure_grad() {
        if (!grad_ready) {
            grad = Tensor(value.shape());
            grad_ready = true;
        }
        return grad;
    }
};

inline std::uint64_t next_seq() {
    static std::uint64_t counter = 0;
    return ++counter;
}

} // namespace detail

/// Handle to a node of the dynamic computation graph. Copy is shallow; the
/// underlying value is shared. Leaves with requires_grad=true act as
/// trainable parameters whose gradients accumulate across backward() calls
/// until zero_grad().
class Var {
public:
    Var() = default;

    explicit Var(Tensor value, bool requires_grad = false)
        : node_(std::make_shared<detail::Node>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
        node_->seq = detail::next_seq();
    }

    static Var scalar(double v) { return Var(Tensor::scalar(v)); }

    /// Create an op result node whose gradient flows into `parents`.
    static Var op(Tensor value, std::vector<Var> parents) {
        Var r(std::move(value), true);
        r.node_->parents.reserve(parents.size());
        for (auto& p : parents) r.node_->parents.push_back(p.node_);
        return r;
    }

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }

    bool requires_grad() const { return node_ && node_->requires_grad; }

    const Tensor& grad() const {
        const_cast<detail::Node*>(node_.get())->ensure_grad();
        return node_->grad;
    }

    void zero_grad() {
        if (!node_) return;
        node_->grad_ready = false;
        node_->grad = Tensor();
    }

    void set_backward(std::function<void()> fn) { node_->backward = std::move(fn); }

    std::shared_ptr<detail::Node> node() const { return node_; }
    detail::Node* raw() const { return node_.get(); }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Reverse-mode sweep from a scalar root. Nodes are visited in reverse
/// creation order, which is a valid topological order because every op's
/// parents predate it.
inline void backward(const Var& root) {
    if (!root.defined()) throw DomainError("backward: undefined root");
    if (root.value().numel() != 1) throw ShapeError("backward: root must be a scalar");
    if (!root.requires_grad()) return;

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<detail::Node*> stack{root.raw()};
    seen.insert(root.raw());
    while (!stack.empty()) {
        detail::Node* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
        }
    }
    std::sort(order.begin(), order.end(),
              [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

    root.raw()->ensure_grad()[0] += 1.0;
    for (detail::Node* n : order) {
        if (n->backward && n->grad_ready) n->backward();
    }
}

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] += b.value()[i];
    if (!a.requires_grad() && !b.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {a, b});
    auto an = a.node(), bn = b.node();
    detail::Node* rn = r.raw();
    r.set_backward([an, bn, rn]() {
        const Tensor& g = rn->grad;
        const std::int64_t m = g.numel();
        if (an->requires_grad) {
            Tensor& ga = an->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) ga[i] += g[i];
        }
        if (bn->requires_grad) {
            Tensor& gb = bn->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) gb[i] += g[i];
        }
    });
    return r;
}

inline Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] -= b.value()[i];
    if (!a.requires_grad() && !b.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {a, b});
    auto an = a.node(), bn = b.node();
    detail::Node* rn = r.raw();
    r.set_backward([an, bn, rn]() {
        const Tensor& g = rn->grad;
        const std::int64_t m = g.numel();
        if (an->requires_grad) {
            Tensor& ga = an->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) ga[i] += g[i];
        }
        if (bn->requires_grad) {
            Tensor& gb = bn->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) gb[i] -= g[i];
        }
    });
    return r;
}

inline Var mul(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] *= b.value()[i];
    if (!a.requires_grad() && !b.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {a, b});
    auto an = a.node(), bn = b.node();
    detail::Node* rn = r.raw();
    r.set_backward([an, bn, rn]() {
        const Tensor& g = rn->grad;
        const std::int64_t m = g.numel();
        if (an->requires_grad) {
            Tensor& ga = an->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) ga[i] += g[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            Tensor& gb = bn->ensure_grad();
            for (std::int64_t i = 0; i < m; ++i) gb[i] += g[i] * an->value[i];
        }
    });
    return r;
}

inline Var scale(const Var& a, double s) {
    Tensor out = a.value();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] *= s;
    if (!a.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {a});
    auto an = a.node();
    detail::Node* rn = r.raw();
    r.set_backward([an, rn, s]() {
        const Tensor& g = rn->grad;
        Tensor& ga = an->ensure_grad();
        const std::int64_t m = g.numel();
        for (std::int64_t i = 0; i < m; ++i) ga[i] += s * g[i];
    });
    return r;
}

inline Var add_scalar(const Var& a, double s) {
    Tensor out = a.value();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] += s;
    if (!a.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {a});
    auto an = a.node();
    detail::Node* rn = r.raw();
    r.set_backward([an, rn]() {
        const Tensor& g = rn->grad;
        Tensor& ga = an->ensure_grad();
        const std::int64_t m = g.numel();
        for (std::int64_t i = 0; i < m; ++i) ga[i] += g[i];
    });
    return r;
}

inline Var sum(const Var& a) {
    double s = 0.0;
    const std::int64_t n = a.value().numel();
    for (std::int64_t i = 0; i < n; ++i) s += a.value()[i];
    if (!a.requires_grad()) return Var::scalar(s);
    Var r = Var::op(Tensor::scalar(s), {a});
    auto an = a.node();
    detail::Node* rn = r.raw();
    r.set_backward([an, rn]() {
        const double g = rn->grad[0];
        Tensor& ga = an->ensure_grad();
        const std::int64_t m = ga.numel();
        for (std::int64_t i = 0; i < m; ++i) ga[i] += g;
    });
    return r;
}

inline Var mean(const Var& a) {
    const std::int64_t n = a.value().numel();
    if (n == 0) throw ShapeError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

/// Mean of a list of scalar vars.
inline Var mean_scalars(const std::vector<Var>& xs) {
    if (xs.empty()) throw DomainError("mean_scalars: empty list");
    Var acc = xs[0];
    for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
    return scale(acc, 1.0 / static_cast<double>(xs.size()));
}

} // namespace iprnet
