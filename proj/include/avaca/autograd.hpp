#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "avaca/array.hpp"

namespace avaca {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a reverse-mode graph. Interior nodes hold a closure that
// pushes this node's gradient into its parents' gradients.
struct Node {
  Array value;
  Array grad;  // empty until the first contribution arrives
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  // Zero-initialises the gradient buffer on first use.
  Array& grad_buffer();
};

// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  // Leaf that receives a gradient from backward().
  static Var parameter(Array value);
  // Leaf that never does.
  static Var constant(Array value);

  const Array& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient after backward(); zeros of the value's shape if none arrived.
  Array grad() const;
  void zero_grad() { node_->grad = Array(); }

  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

// Builds an interior node. The closure is dropped when no parent needs a
// gradient, so pure-inference graphs stay cheap.
Var make_node(Array value, std::vector<Var> parents, std::function<void(Node&)> backward);

// Reverse-mode accumulation from a scalar root into every reachable node.
// Leaves reached along several paths receive the sum of contributions.
void backward(const Var& root);

}  // namespace avaca
