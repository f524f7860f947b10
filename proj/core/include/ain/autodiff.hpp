#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ain/tensor.hpp"

namespace ain {

/// One recorded value in the differentiation graph. Interior nodes are created
/// by ops during a forward pass; parameter leaves outlive individual passes.
template <typename T>
struct Node {
    std::string op;
    Tensor<T> value;
    Tensor<T> grad;  // empty scalar until first accumulation
    bool grad_ready = false;
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad and accumulates into parents that require grad.
    std::function<void(Node&)> backward_fn;

    Tensor<T>& grad_buffer() {
        if (!grad_ready) {
            grad = Tensor<T>::zeros_like(value);
            grad_ready = true;
        }
        return grad;
    }

    void accumulate(const Tensor<T>& g) {
        if (!requires_grad) return;
        if (!grad_ready) {
            if (g.shape() != value.shape())
                throw ContractError(op + ": gradient shape " + to_string(g.shape()) + " != value shape " +
                                    to_string(value.shape()));
            grad = g;
            grad_ready = true;
        } else {
            grad += g;
        }
    }
};

/// Handle to a graph node.
template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    /// Constant leaf: participates in forward but receives no gradient.
    static Var constant(Tensor<T> value) {
        auto n = std::make_shared<Node<T>>();
        n->op = "constant";
        n->value = std::move(value);
        return Var(std::move(n));
    }

    /// Leaf that records its gradient (inputs under gradient checks).
    static Var leaf(Tensor<T> value, std::string name = "leaf") {
        auto n = std::make_shared<Node<T>>();
        n->op = std::move(name);
        n->value = std::move(value);
        n->requires_grad = true;
        return Var(std::move(n));
    }

    const Tensor<T>& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }

    /// Gradient accumulated by backward(); zeros when nothing reached the node.
    Tensor<T> grad() const { return node_->grad_ready ? node_->grad : Tensor<T>::zeros_like(node_->value); }

    Node<T>& node() const { return *node_; }
    const std::shared_ptr<Node<T>>& ptr() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Creates an interior node whose gradient flows to `parents`.
template <typename T>
Var<T> make_node(std::string op, Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->op = std::move(op);
    n->value = std::move(value);
    n->is_leaf = false;
    for (auto& p : parents) {
        n->requires_grad = n->requires_grad || p.requires_grad();
        n->parents.push_back(p.ptr());
    }
    if (n->requires_grad) n->backward_fn = std::move(backward);
    return Var<T>(std::move(n));
}

/// Named learnable tensor. Copies share the same underlying leaf.
template <typename T>
class Parameter {
public:
    Parameter() = default;
    Parameter(std::string name, Tensor<T> value) : node_(std::make_shared<Node<T>>()) {
        node_->op = std::move(name);
        node_->value = std::move(value);
        node_->requires_grad = true;
    }

    const std::string& name() const { return node_->op; }
    Tensor<T>& value() { return node_->value; }
    const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& grad() { return node_->grad_buffer(); }
    const Tensor<T>& grad() const { return node_->grad_buffer(); }
    Var<T> var() const { return Var<T>(node_); }
    std::size_t size() const { return node_->value.size(); }

    void zero_grad() {
        if (node_->grad_ready) node_->grad.fill(T{0});
    }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Reverse sweep from a scalar root. Interior gradients are recomputed from
/// scratch on each call; leaf gradients accumulate across calls.
template <typename T>
void backward(const Var<T>& root);

template <typename T>
void zero_grad(std::span<Parameter<T>> params) {
    for (auto& p : params) p.zero_grad();
}

template <typename T>
void zero_grad(std::vector<Parameter<T>>& params) {
    zero_grad(std::span<Parameter<T>>(params));
}

}  // namespace ain
