// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace rng::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Trainable tensor with its gradient accumulator. The accumulator is
/// mutable so that read-only models can still be differentiated.
template <typename T>
struct Param {
  Mat<T> value;
  mutable Mat<T> grad;

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

/// Handle to a node of a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Every op appends a node holding its value and, when
/// any input needs a gradient, a closure that propagates the node's gradient
/// to its inputs. A graph built with `record = false` keeps values only.
template <typename T>
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Mat<T> value);
  /// Leaf bound to a parameter; backward() adds its gradient into p.grad.
  Var parameter(const Param<T>& p);

  const Mat<T>& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

  /// Gradient of a node after backward(); empty when nothing reached it.
  const Mat<T>& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  /// Seeds d(objective)/d(output) for each given output and runs the tape in
  /// reverse.
  void backward(const std::vector<std::pair<Var, Mat<T>>>& seeds);

  // Op-implementation interface.
  Var emit(Mat<T> value, std::initializer_list<Var> inputs, std::function<void(const Mat<T>&)> backward_fn);
  Var emit(Mat<T> value, const std::vector<Var>& inputs, std::function<void(const Mat<T>&)> backward_fn);
  /// Adds `g` into the gradient of `v` when it needs one.
  void accumulate(Var v, const Mat<T>& g);
  template <typename Fn>
  void accumulate_with(Var v, Fn&& fn) {
    auto& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
    fn(n.grad);
  }

  std::size_t size() const { return nodes_.size(); }
  /// Bytes held by node values and gradients.
  std::size_t value_bytes() const;

 private:
  struct Node {
    Mat<T> value;
    Mat<T> grad;
    bool requires_grad = false;
    const Param<T>* param = nullptr;
    std::function<void(const Mat<T>&)> backward;
  };

  bool record_;
  std::deque<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace rng::nn
