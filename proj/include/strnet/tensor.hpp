#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "strnet/common.hpp"

namespace strnet {

namespace detail {

// One record on the computation tape. Nodes form a DAG through `parents`;
// replaying the tape backward visits each reachable node exactly once and
// accumulates gradients additively, so a tensor consumed k times receives
// the sum of its k branch gradients.
struct TapeNode {
  std::vector<std::shared_ptr<TapeNode>> parents;
  std::vector<double> grad;  // sized on first accumulation
  std::size_t numel = 0;
  std::function<void(TapeNode&)> backprop;  // pushes grad into parents

  void accumulate(const double* g, std::size_t n) {
    if (grad.empty()) grad.assign(numel, 0.0);
    for (std::size_t i = 0; i < n; ++i) grad[i] += g[i];
  }
};

using NodePtr = std::shared_ptr<TapeNode>;

}  // namespace detail

// Dense row-major tensor of 64-bit reals. Values are immutable once the
// tensor is constructed; autograd tracking hangs off a shared tape node.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : shape_(std::move(shape)),
        data_(std::make_shared<const std::vector<double>>(std::move(data))) {
    if (shape_numel(shape_) != data_->size())
      throw ShapeError("tensor data length " + std::to_string(data_->size()) +
                       " does not match shape " + shape_str(shape_));
    for (double v : *data_)
      if (!std::isfinite(v)) throw NumericError("non-finite value in tensor construction");
    if (requires_grad) {
      node_ = std::make_shared<detail::TapeNode>();
      node_->numel = data_->size();
    }
  }

  static Tensor zeros(Shape shape) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
  }

  static Tensor full(Shape shape, double v) {
    std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  static Tensor identity(std::size_t n) {
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
    return Tensor({n, n}, std::move(d));
  }

  // Tracked leaf sharing an externally owned buffer (parameter binding).
  static Tensor leaf(Shape shape, std::shared_ptr<const std::vector<double>> data) {
    Tensor t;
    if (shape_numel(shape) != data->size())
      throw ShapeError("leaf data length does not match shape " + shape_str(shape));
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    t.node_ = std::make_shared<detail::TapeNode>();
    t.node_->numel = t.data_->size();
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  bool empty() const { return !data_; }

  std::span<const double> values() const {
    if (!data_) return {};
    return {data_->data(), data_->size()};
  }

  double at(std::size_t i) const { return data_->at(i); }
  double at(std::size_t i, std::size_t j) const {
    return data_->at(i * shape_.at(1) + j);
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_->at((i * shape_.at(1) + j) * shape_.at(2) + k);
  }

  double value() const {
    if (size() != 1) throw ShapeError("value() on non-scalar tensor " + shape_str(shape_));
    return (*data_)[0];
  }

  bool requires_grad() const { return node_ != nullptr; }

  // Gradient accumulated by backward(); valid on tracked tensors afterwards.
  const std::vector<double>& grad() const {
    if (!node_) throw ValueError("grad() on an untracked tensor");
    if (node_->grad.empty()) {
      static const std::vector<double> empty;
      if (node_->numel == 0) return empty;
      node_->grad.assign(node_->numel, 0.0);
    }
    return node_->grad;
  }

  void assert_finite(const std::string& context) const {
    for (double v : *data_)
      if (!std::isfinite(v)) throw NumericError("non-finite value in " + context);
  }

  bool all_finite() const {
    for (double v : *data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // --- op machinery -------------------------------------------------------

  // Constructs an op output without re-validating finiteness; `parents` may
  // contain nulls for untracked inputs. The output is tracked iff any input
  // is tracked.
  static Tensor from_op(Shape shape, std::shared_ptr<const std::vector<double>> data,
                        std::vector<detail::NodePtr> parents,
                        std::function<void(detail::TapeNode&)> backprop) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    bool tracked = false;
    for (const auto& p : parents)
      if (p) tracked = true;
    if (tracked) {
      t.node_ = std::make_shared<detail::TapeNode>();
      t.node_->numel = t.data_->size();
      t.node_->parents = std::move(parents);
      t.node_->backprop = std::move(backprop);
    }
    return t;
  }

  static Tensor from_op(Shape shape, std::vector<double> data,
                        std::vector<detail::NodePtr> parents,
                        std::function<void(detail::TapeNode&)> backprop) {
    return from_op(std::move(shape),
                   std::make_shared<const std::vector<double>>(std::move(data)),
                   std::move(parents), std::move(backprop));
  }

  const detail::NodePtr& node() const { return node_; }
  const std::shared_ptr<const std::vector<double>>& data_ptr() const { return data_; }

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  detail::NodePtr node_;
};

// Reverse pass from a scalar. Topological order guarantees every consumer
// has pushed its contribution before a node's own backprop runs.
inline void backward(const Tensor& loss) {
  if (loss.size() != 1) throw ShapeError("backward() expects a scalar loss");
  if (!loss.node()) throw ValueError("backward() on an untracked tensor");

  std::vector<detail::TapeNode*> order;
  std::unordered_set<detail::TapeNode*> seen;
  struct Frame {
    detail::TapeNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::TapeNode* p = f.node->parents[f.next_parent++].get();
      if (p && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  double one = 1.0;
  loss.node()->accumulate(&one, 1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TapeNode* n = *it;
    if (n->backprop) {
      if (n->grad.empty()) n->grad.assign(n->numel, 0.0);
      n->backprop(*n);
    }
  }
}

}  // namespace strnet
