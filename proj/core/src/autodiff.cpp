#include "ain/autodiff.hpp"

#include <unordered_set>

namespace ain {

template <typename T>
void backward(const Var<T>& root) {
    if (!root) throw ContractError("backward on an empty Var");
    if (root.value().size() != 1)
        throw ContractError("backward requires a scalar root, got shape " + to_string(root.shape()));
    if (!root.requires_grad()) return;

    // Iterative post-order DFS; `order` ends up parents-before-children.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{&root.node(), 0}};
    seen.insert(&root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node<T>* n : order)
        if (!n->is_leaf) n->grad_ready = false;

    Node<T>& r = root.node();
    if (r.is_leaf) {
        r.accumulate(Tensor<T>(r.value.shape(), T{1}));
        return;
    }
    r.grad = Tensor<T>(r.value.shape(), T{1});
    r.grad_ready = true;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->is_leaf || !n->grad_ready || !n->backward_fn) continue;
        n->backward_fn(*n);
    }
}

template void backward<float>(const Var<float>&);
template void backward<double>(const Var<double>&);
template void backward<long double>(const Var<long double>&);

}  // namespace ain
