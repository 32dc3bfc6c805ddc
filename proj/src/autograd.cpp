#include "wait/autograd.hpp"

#include <algorithm>
#include <unordered_set>

namespace wait {

void backward(const Var& loss) {
  if (!loss.defined()) throw NumericError("backward: undefined loss");
  if (loss.value().numel() != 1) throw NumericError("backward: loss must be scalar");

  // Iterative post-order DFS; `order` ends up topologically sorted
  // (parents before children), we then walk it in reverse.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx].get();
      ++idx;
      if (p && p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad().fill(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad_ready) n->backward_fn(*n);
  }
}

}  // namespace wait
