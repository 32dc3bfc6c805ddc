#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "wait/tensor.hpp"

namespace wait {

// Reverse-mode autodiff over a define-by-run graph. Every op builds a Node
// whose backward closure scatters the node's grad into its parents. Backward
// order is a fixed reverse topological order, and every reduction inside the
// kernels runs in ascending index order, so gradients are bitwise
// reproducible for a given graph.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_ready = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad_ready) {
      grad = Tensor::zeros(value.shape());
      grad_ready = true;
    }
    return grad;
  }

  void clear_grad() {
    grad = Tensor();
    grad_ready = false;
  }
};

using NodePtr = std::shared_ptr<Node>;

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}
  Var(Tensor value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  Tensor& grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad_ready; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad() { node_->clear_grad(); }
  const NodePtr& node() const { return node_; }

  // A view of the same value with the graph cut off.
  Var detach() const { return Var(node_->value, false); }

 private:
  NodePtr node_;
};

// Graph recording switch. Inside a NoGradGuard every op produces a detached
// node, so inference holds no intermediate activations.
struct GradMode {
  static bool& enabled() {
    static thread_local bool e = true;
    return e;
  }
};

struct NoGradGuard {
  NoGradGuard() : prev(GradMode::enabled()) { GradMode::enabled() = false; }
  ~NoGradGuard() { GradMode::enabled() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
  bool prev;
};

// Builds an op node. `backward_fn` may be empty when no parent needs grads;
// callers should skip capturing forward intermediates in that case.
inline Var make_op_node(Tensor value, std::vector<NodePtr> parents,
                        std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (GradMode::enabled()) {
    for (const auto& p : parents)
      if (p && p->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return Var(n);
}

inline bool any_requires_grad(const std::vector<NodePtr>& parents) {
  if (!GradMode::enabled()) return false;
  for (const auto& p : parents)
    if (p && p->requires_grad) return true;
  return false;
}

// Runs backward from a scalar loss; seeds d(loss)/d(loss) = 1.
void backward(const Var& loss);

}  // namespace wait
