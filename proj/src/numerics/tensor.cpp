#include "byov/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace byov::num {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {

template <class S>
std::shared_ptr<detail::Node<S>> new_leaf(Shape shape, Buffer<S> data, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " elements");
  }
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = std::move(shape);
  node->value = std::make_shared<Buffer<S>>(std::move(data));
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

template <class S>
Tensor<S> Tensor<S>::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(new_leaf<S>(std::move(shape), Buffer<S>(n, S(0)), requires_grad));
}

template <class S>
Tensor<S> Tensor<S>::from_data(Shape shape, std::vector<S> data, bool requires_grad) {
  return Tensor(new_leaf<S>(std::move(shape), Buffer<S>(data.begin(), data.end()), requires_grad));
}

template <class S>
Tensor<S> Tensor<S>::scalar(S value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

template <class S>
std::size_t Tensor<S>::rows() const {
  const Shape& s = node_->shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("rows() requires a 1-D or 2-D tensor, got " + shape_str(s));
}

template <class S>
S Tensor<S>::item() const {
  if (numel() != 1) throw ContractError("item() on a tensor with " + std::to_string(numel()) + " elements");
  return (*node_->value)[0];
}

template <class S>
Tensor<S> Tensor<S>::alias() const {
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = node_->shape;
  node->value = node_->value;
  node->requires_grad = node_->requires_grad;
  return Tensor(std::move(node));
}

template <class S>
Tensor<S> Tensor<S>::detach() const {
  return Tensor(new_leaf<S>(node_->shape, *node_->value, false));
}

template <class S>
bool Tensor<S>::all_finite() const {
  return std::all_of(node_->value->begin(), node_->value->end(), [](S v) { return std::isfinite(v); });
}

template <class S>
void Tensor<S>::backward() const {
  if (!node_) throw ContractError("backward() on an undefined tensor");
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) throw ContractError("backward() on a tensor that records no graph");

  // Iterative post-order DFS; reverse of the result is a topological order.
  std::vector<detail::Node<S>*> order;
  std::unordered_set<detail::Node<S>*> seen;
  std::vector<std::pair<detail::Node<S>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<S>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<S>* node = *it;
    if (!node->backward) continue;  // leaf
    if (!node->grad.empty()) node->backward(*node);
    // Interior gradients are scratch space for this pass only.
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

template <class S>
Tensor<S> make_result(Shape shape, Buffer<S> value, std::vector<Tensor<S>> inputs,
                      std::function<void(detail::Node<S>&)> backward) {
  auto node = std::make_shared<detail::Node<S>>();
  node->shape = std::move(shape);
  node->value = std::make_shared<Buffer<S>>(std::move(value));
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor<S>& t) { return t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(inputs.size());
    for (auto& t : inputs) node->parents.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor<S>(std::move(node));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(Shape, Buffer<float>, std::vector<Tensor<float>>,
                                   std::function<void(detail::Node<float>&)>);
template Tensor<double> make_result(Shape, Buffer<double>, std::vector<Tensor<double>>,
                                    std::function<void(detail::Node<double>&)>);

}  // namespace byov::num
