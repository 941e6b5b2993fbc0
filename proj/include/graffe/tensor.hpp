#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "graffe/common.hpp"

namespace graffe {

namespace detail {

inline std::uint64_t& node_id_counter() {
    thread_local std::uint64_t counter = 0;
    return counter;
}

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

template <class T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until backward touches this node
    bool requires_grad = false;
    bool backward_ran = false;
    std::uint64_t id = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Accumulates into parents' grads given this node's grad.
    std::function<void(const std::vector<T>&)> backward_fn;

    std::int64_t size() const { return static_cast<std::int64_t>(value.size()); }

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T(0));
        return grad;
    }
};

}  // namespace detail

/// Disables graph recording in the current scope (inference paths).
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

/// Dense row-major tensor participating in reverse-mode differentiation.
/// Copying a Tensor copies the handle, not the storage.
template <class T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;

    static Tensor from_values(Shape shape, std::vector<T> values) {
        if (static_cast<std::int64_t>(values.size()) != numel(shape))
            throw ShapeError("from_values", "values length " + std::to_string(values.size()) +
                                                " does not match shape " + shape_str(shape));
        Tensor t;
        t.n_ = std::make_shared<detail::Node<T>>();
        t.n_->shape = std::move(shape);
        t.n_->value = std::move(values);
        t.n_->id = ++detail::node_id_counter();
        return t;
    }

    static Tensor zeros(Shape shape) {
        auto n = numel(shape);
        return from_values(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), T(0)));
    }

    static Tensor full(Shape shape, T v) {
        auto n = numel(shape);
        return from_values(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), v));
    }

    static Tensor scalar(T v) { return from_values({1}, {v}); }

    /// Trainable leaf: participates in backward and optimizer steps.
    static Tensor parameter(Shape shape, std::vector<T> values) {
        Tensor t = from_values(std::move(shape), std::move(values));
        t.n_->requires_grad = true;
        t.n_->op = "parameter";
        return t;
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::int64_t size() const { return n_->size(); }
    std::int64_t rows() const { return n_->shape.size() > 0 ? n_->shape[0] : 1; }
    std::int64_t cols() const { return n_->shape.size() > 1 ? n_->shape[1] : 1; }
    std::uint64_t id() const { return n_->id; }
    bool requires_grad() const { return n_->requires_grad; }

    std::vector<T>& values() { return n_->value; }
    const std::vector<T>& values() const { return n_->value; }
    T* data() { return n_->value.data(); }
    const T* data() const { return n_->value.data(); }

    bool has_grad() const { return !n_->grad.empty(); }
    std::vector<T>& grad() { return n_->ensure_grad(); }
    const std::vector<T>& grad_view() const { return n_->grad; }

    void zero_grad() {
        n_->grad.clear();
        n_->backward_ran = false;
    }

    T item() const {
        if (size() != 1) throw AutodiffError("item() on non-scalar tensor " + shape_str(shape()));
        return n_->value[0];
    }

    T operator()(std::int64_t r, std::int64_t c) const { return n_->value[static_cast<std::size_t>(r * cols() + c)]; }
    T& at(std::int64_t r, std::int64_t c) { return n_->value[static_cast<std::size_t>(r * cols() + c)]; }

    std::shared_ptr<detail::Node<T>> node() const { return n_; }

    /// Reverse-mode sweep from a scalar root. Every tracked leaf reachable
    /// from the root receives its exact gradient. Repeating the call on the
    /// same graph without rebuilding it is an error.
    void backward() const {
        if (!n_) throw AutodiffError("backward() on empty tensor");
        if (size() != 1) throw AutodiffError("backward() root must be scalar, got " + shape_str(shape()));
        if (!n_->requires_grad && n_->parents.empty())
            throw AutodiffError("backward() root is not part of a tracked graph");
        if (n_->backward_ran) throw AutodiffError("backward() called twice on the same graph");
        n_->backward_ran = true;

        // Reverse topological order: DFS over parents, reversed finish order.
        std::vector<detail::Node<T>*> order;
        std::unordered_set<detail::Node<T>*> seen;
        struct Frame {
            detail::Node<T>* node;
            std::size_t next_parent;
        };
        std::vector<Frame> stack;
        stack.push_back({n_.get(), 0});
        seen.insert(n_.get());
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next_parent < f.node->parents.size()) {
                detail::Node<T>* p = f.node->parents[f.next_parent++].get();
                if (seen.insert(p).second) stack.push_back({p, 0});
            } else {
                order.push_back(f.node);
                stack.pop_back();
            }
        }

        n_->ensure_grad();
        n_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            detail::Node<T>* node = *it;
            if (!node->backward_fn) continue;
            if (node->grad.empty()) continue;  // no consumer contributed
            node->backward_fn(node->grad);
        }
    }

private:
    std::shared_ptr<detail::Node<T>> n_;
};

namespace detail {

/// Builds a result node wired to its parents; the closure is dropped when
/// grad recording is off or no parent is tracked.
template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::vector<Tensor<T>> parents,
                      std::function<void(const std::vector<T>&)> backward_fn) {
    Tensor<T> out = Tensor<T>::from_values(std::move(shape), std::move(values));
    bool any_tracked = false;
    for (const auto& p : parents)
        if (p.node()->requires_grad || !p.node()->parents.empty()) any_tracked = true;
    out.node()->op = op;
    if (grad_mode() && any_tracked) {
        out.node()->requires_grad = true;
        for (auto& p : parents) out.node()->parents.push_back(p.node());
        out.node()->backward_fn = std::move(backward_fn);
    }
    return out;
}

}  // namespace detail

}  // namespace graffe
