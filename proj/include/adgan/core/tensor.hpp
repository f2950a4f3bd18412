#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "adgan/errors.hpp"

namespace adgan {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

namespace detail {
// Execution order of graph nodes. Per thread, so independent graphs built
// on different threads never interleave their numbering.
inline std::uint64_t next_sequence() {
  thread_local std::uint64_t counter = 0;
  return ++counter;
}
}  // namespace detail

/// One value in the computation graph. Leaves have sequence 0 and no
/// backward function; every primitive call creates exactly one interior node.
template <class T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // sized like data while requires_grad
  bool requires_grad = false;
  std::uint64_t sequence = 0;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return sequence == 0; }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

/// Shared handle onto a graph node. Copies alias the same storage.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    if (shape_numel(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    set_requires_grad(requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad; }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }

  /// Only meaningful on leaves; toggling it freezes or unfreezes a parameter.
  void set_requires_grad(bool flag) {
    node_->requires_grad = flag;
    if (flag) node_->ensure_grad();
  }

  void zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  bool is_leaf() const { return node_->is_leaf(); }

  /// Copy of the values with no history and no gradient.
  Tensor detach() const { return Tensor(node_->shape, node_->data, false); }

  /// Same storage semantics as detach() but keeps requires_grad, producing a
  /// fresh leaf. Used to make independent parameter copies.
  Tensor clone_leaf() const { return Tensor(node_->shape, node_->data, node_->requires_grad); }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(node_->data.begin(), node_->data.end());
    return Tensor<U>(node_->shape, std::move(out), node_->requires_grad);
  }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

  void backward() const;

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Interior nodes reachable from a root, in execution order. Replaying the
/// chain rule walks this list back to front.
template <class T>
struct ComputationGraph {
  std::vector<Node<T>*> nodes;

  static ComputationGraph trace(const Tensor<T>& root) {
    ComputationGraph graph;
    std::unordered_set<Node<T>*> seen;
    std::vector<Node<T>*> stack{root.node().get()};
    while (!stack.empty()) {
      Node<T>* node = stack.back();
      stack.pop_back();
      if (!seen.insert(node).second || node->is_leaf()) continue;
      graph.nodes.push_back(node);
      for (const auto& input : node->inputs) stack.push_back(input.get());
    }
    std::sort(graph.nodes.begin(), graph.nodes.end(),
              [](const Node<T>* a, const Node<T>* b) { return a->sequence < b->sequence; });
    return graph;
  }

  std::size_t size() const { return nodes.size(); }
};

/// Builds the result of a primitive. When no input requires a gradient the
/// result is a constant and no history is kept.
template <class T>
Tensor<T> make_result(std::string op, Shape shape, std::vector<T> data,
                      std::vector<Tensor<T>> inputs, std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor<T>& t) { return t.requires_grad(); });
  if (tracked) {
    node->requires_grad = true;
    node->sequence = detail::next_sequence();
    node->op = std::move(op);
    for (auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

/// Accumulates gradients of a scalar into every reachable leaf that requires
/// them. Leaf gradients add up across calls; interior gradients are rebuilt.
template <class T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!requires_grad()) return;
  auto graph = ComputationGraph<T>::trace(*this);
  for (Node<T>* node : graph.nodes) node->grad.assign(node->data.size(), T(0));
  node_->grad[0] += T(1);
  for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it) {
    Node<T>& node = **it;
    node.backward(node);
  }
  for (Node<T>* node : graph.nodes) {
    if (node != node_.get()) std::vector<T>().swap(node->grad);
  }
}

}  // namespace adgan
