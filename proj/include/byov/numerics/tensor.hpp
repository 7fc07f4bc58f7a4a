#pragma once

// Dense row-major tensors with a recorded reverse-mode graph.
//
// A Tensor is a cheap handle to a shared node. Values are held behind a
// shared buffer so that parameter aliases (see Tensor::alias) can read the
// same storage while accumulating gradients into their own buffers.

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace byov::num {

using Shape = std::vector<std::size_t>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-byte aligned storage. Vectorized reductions peel unaligned heads, so
// aligned buffers keep results independent of where malloc placed them.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlignment); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <class S>
using Buffer = std::vector<S, AlignedAllocator<S>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

template <class S>
struct Node {
  Shape shape;
  std::shared_ptr<Buffer<S>> value;
  Buffer<S> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents.
  std::function<void(Node&)> backward;

  std::span<S> grad_buffer() {
    if (grad.empty()) grad.assign(value->size(), S(0));
    return grad;
  }
};

}  // namespace detail

template <class S>
class Tensor {
 public:
  using Scalar = S;
  using NodePtr = std::shared_ptr<detail::Node<S>>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<S> data, bool requires_grad = false);
  static Tensor scalar(S value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->value->size(); }
  // Leading extent for 2-D tensors; 1 for vectors.
  std::size_t rows() const;
  // Last-axis extent.
  std::size_t cols() const { return node_->shape.back(); }

  std::span<const S> data() const { return *node_->value; }
  std::span<S> mutable_data() { return *node_->value; }
  S item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const S> grad() const { return node_->grad; }
  std::span<S> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.clear(); }

  // New leaf that shares this tensor's value storage but owns its gradient.
  Tensor alias() const;
  // New leaf holding a copy of the value; never records gradients.
  Tensor detach() const;
  bool all_finite() const;

  // Reverse pass from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  const NodePtr& node() const { return node_; }
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr node_;
};

// Builds an op result. When any input records gradients the node keeps its
// parents and the supplied backward closure; otherwise both are dropped.
template <class S>
Tensor<S> make_result(Shape shape, Buffer<S> value,
                      std::vector<Tensor<S>> inputs,
                      std::function<void(detail::Node<S>&)> backward);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace byov::num
