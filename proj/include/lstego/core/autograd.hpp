#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lstego/core/tensor.hpp"

namespace lstego {

// Reverse-mode autodiff over tensors. A Var is a cheap handle to a graph node;
// the graph is released when the last handle to its root goes away.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && !value.empty(); }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Var constant(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return Var(std::move(n));
  }
  static Var leaf(Tensor<T> v, bool requires_grad = true) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return node_->has_grad(); }
  Tensor<T>& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad = Tensor<T>(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool r) { node_->requires_grad = r; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(std::size_t i) const { return node_->value.dim(i); }
  std::size_t size() const { return node_->value.size(); }
  T item() const { return node_->value[0]; }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  // Seeds d(this)/d(this) with `seed` (ones when empty) and propagates to all
  // reachable leaves that require grad.
  void backward(const Tensor<T>& seed = Tensor<T>()) const {
    auto order = topo_order();
    Node<T>& root = *node_;
    if (seed.empty()) {
      root.grad_buffer().fill(T(1));
    } else {
      root.value.check_same(seed);
      root.grad_buffer() += seed;
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* n = *it;
      if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
    }
    // Interior grads are scratch; only leaves keep theirs.
    for (Node<T>* n : order)
      if (n->backward_fn) n->grad = Tensor<T>();
  }

 private:
  std::vector<Node<T>*> topo_order() const {
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->inputs.size()) {
        Node<T>* child = n->inputs[idx++].get();
        if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    return order;
  }

  std::shared_ptr<Node<T>> node_;
};

// Builds a result node. When no input requires grad, the closure and the input
// references are dropped so inference does not retain the graph.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs,
                   std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (any) {
    n->requires_grad = true;
    for (auto& in : inputs) n->inputs.push_back(in.node_ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Var<T>(std::move(n));
}

}  // namespace lstego
