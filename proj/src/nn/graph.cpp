// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/nn/graph.hpp"

#include "rng/common/error.hpp"

namespace rng::nn {

template <typename T>
Var Graph<T>::constant(Mat<T> value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::parameter(const Param<T>& p) {
  nodes_.push_back(Node{p.value, {}, record_, record_ ? &p : nullptr, {}});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::emit(Mat<T> value, std::initializer_list<Var> inputs, std::function<void(const Mat<T>&)> backward_fn) {
  bool needs = false;
  if (record_) {
    for (Var v : inputs) needs = needs || (v.valid() && requires_grad(v));
  }
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(backward_fn) : nullptr});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
Var Graph<T>::emit(Mat<T> value, const std::vector<Var>& inputs, std::function<void(const Mat<T>&)> backward_fn) {
  bool needs = false;
  if (record_) {
    for (Var v : inputs) needs = needs || (v.valid() && requires_grad(v));
  }
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(backward_fn) : nullptr});
  return Var{static_cast<int>(nodes_.size() - 1)};
}

template <typename T>
void Graph<T>::accumulate(Var v, const Mat<T>& g) {
  accumulate_with(v, [&](Mat<T>& acc) { acc += g; });
}

template <typename T>
void Graph<T>::backward(const std::vector<std::pair<Var, Mat<T>>>& seeds) {
  require(record_, ErrorCode::kInvalidArgument, "backward() on a graph built without recording");
  for (const auto& [v, g] : seeds) {
    require(g.rows() == value(v).rows() && g.cols() == value(v).cols(), ErrorCode::kShapeMismatch,
            "gradient seed does not match its output");
    accumulate(v, g);
  }
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    auto& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backward) n.backward(n.grad);
    if (n.param != nullptr) {
      if (n.param->grad.size() == 0) n.param->zero_grad();
      n.param->grad += n.grad;
    }
  }
}

template <typename T>
std::size_t Graph<T>::value_bytes() const {
  std::size_t n = 0;
  for (const auto& node : nodes_) n += static_cast<std::size_t>(node.value.size() + node.grad.size());
  return n * sizeof(T);
}

template class Graph<float>;
template class Graph<double>;

}  // namespace rng::nn
