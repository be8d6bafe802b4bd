// Copyright 2026 The prosfda Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef PROSFDA_TENSOR_HPP
#define PROSFDA_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "prosfda/common.hpp"

namespace prosfda {

namespace detail {

template <class Real>
struct TensorNode {
  std::vector<int> shape;
  std::vector<Real> values;
  std::vector<Real> grad;  // same length as values once touched
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(TensorNode&)> backprop;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), Real(0));
  }
};

inline std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace detail

// Whether newly created ops record backprop closures. Off inside NoGradGuard
// scopes (evaluation paths that never call backward).
class GradMode {
 public:
  static bool enabled() { return state(); }
  static void set_enabled(bool on) { state() = on; }

 private:
  static bool& state() {
    thread_local bool enabled = true;
    return enabled;
  }
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Shared handle to a node of the recorded computation. Copying a Tensor
// copies the handle, not the data.
template <class Real>
class Tensor {
 public:
  using Node = detail::TensorNode<Real>;

  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return full(std::move(shape), Real(0), requires_grad);
  }

  static Tensor ones(std::vector<int> shape, bool requires_grad = false) {
    return full(std::move(shape), Real(1), requires_grad);
  }

  static Tensor full(std::vector<int> shape, Real value, bool requires_grad = false) {
    validate_shape(shape);
    auto node = std::make_shared<Node>();
    node->values.assign(static_cast<std::size_t>(detail::shape_numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    if (requires_grad) node->ensure_grad();
    return Tensor(std::move(node));
  }

  static Tensor from_values(std::vector<int> shape, std::vector<Real> values,
                            bool requires_grad = false) {
    validate_shape(shape);
    if (static_cast<std::int64_t>(values.size()) != detail::shape_numel(shape)) {
      throw ShapeError("value count " + std::to_string(values.size()) +
                       " does not match shape " + detail::shape_str(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    if (requires_grad) node->ensure_grad();
    return Tensor(std::move(node));
  }

  static Tensor scalar(Real value, bool requires_grad = false) {
    return from_values({1}, {value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  std::int64_t size() const { return static_cast<std::int64_t>(node_->values.size()); }

  std::vector<Real>& values() { return node_->values; }
  const std::vector<Real>& values() const { return node_->values; }

  const std::vector<Real>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }

  bool requires_grad() const { return node_->requires_grad; }

  void set_requires_grad(bool on) {
    node_->requires_grad = on;
    if (on) node_->ensure_grad();
  }

  void zero_grad() {
    node_->ensure_grad();
    std::fill(node_->grad.begin(), node_->grad.end(), Real(0));
  }

  Real item() const {
    if (node_->values.size() != 1) {
      throw ShapeError("item() requires a scalar tensor, got shape " +
                       detail::shape_str(node_->shape));
    }
    return node_->values[0];
  }

  // Value copy detached from the graph.
  Tensor detached_clone() const {
    return from_values(node_->shape, node_->values, false);
  }

  std::shared_ptr<Node> node() const { return node_; }

  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  static void validate_shape(const std::vector<int>& shape) {
    if (shape.empty()) throw ShapeError("tensor rank must be >= 1");
    for (int d : shape) {
      if (d <= 0) throw ShapeError("non-positive dimension in shape " + detail::shape_str(shape));
    }
  }

  std::shared_ptr<Node> node_;
};

namespace detail {

// Op-output factory: wires parents and the backprop closure only when some
// input actually needs gradient and recording is on.
template <class Real>
Tensor<Real> make_op(std::vector<int> shape, std::vector<Real> values,
                     const std::vector<Tensor<Real>>& inputs,
                     std::function<void(TensorNode<Real>&)> backprop) {
  bool needs = GradMode::enabled();
  if (needs) {
    needs = false;
    for (const auto& t : inputs) {
      if (t.defined() && t.node()->requires_grad) {
        needs = true;
        break;
      }
    }
  }
  auto node = std::make_shared<TensorNode<Real>>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  if (needs) {
    node->requires_grad = true;
    for (const auto& t : inputs) {
      if (t.defined()) node->parents.push_back(t.node());
    }
    node->backprop = std::move(backprop);
  }
  return Tensor<Real>(std::move(node));
}

template <class Real>
void accumulate_grad(TensorNode<Real>& node, const std::vector<Real>& delta) {
  node.ensure_grad();
  for (std::size_t i = 0; i < delta.size(); ++i) node.grad[i] += delta[i];
}

}  // namespace detail

// Reverse-mode sweep from a scalar loss. Gradients accumulate into the grad
// buffers of every reachable tensor; leaves off the path keep all-zero grads.
template <class Real>
void backward(const Tensor<Real>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward requires a scalar loss");
  }
  using Node = detail::TensorNode<Real>;
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  // Iterative post-order DFS over parent links.
  std::vector<std::pair<Node*, std::size_t>> stack;
  Node* root = loss.node().get();
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop(*node);
    }
  }
}

}  // namespace prosfda

#endif  // PROSFDA_TENSOR_HPP
