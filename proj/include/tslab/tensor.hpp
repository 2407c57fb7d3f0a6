#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tslab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One node of the define-by-run gradient graph. A node is created by every
// op whose inputs require gradients; `seq` records execution order so that
// backward can replay nodes in exact reverse order.
struct TensorNode {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;
  bool requires_grad = false;
  // Double accumulator of a scalar reduction before rounding to float.
  double exact = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;

  std::vector<float>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
    return grad;
  }
};

}  // namespace detail

// Dense row-major float32 tensor with optional reverse-mode gradient
// tracking. Copies are shallow: they alias the same node, as with handles
// in most autodiff frameworks. Use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<float> data();
  std::span<const float> data() const;
  float item() const;
  // Like item(), but reductions (sum, mean, cross_entropy) report their
  // double accumulator instead of the float32-rounded value.
  double item_exact() const;
  float at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  // Drops the gradient graph; the result shares no state with this tensor.
  Tensor detach() const;
  Tensor clone() const;

  // Reverse-mode sweep from a scalar. Every reachable tensor that requires
  // gradients accumulates d(this)/d(tensor) into its grad buffer.
  void backward() const;

  bool all_finite() const;

  detail::TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

  static Tensor make_result(Shape shape, std::vector<float> values,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::TensorNode&)> backward_fn);

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::TensorNode> node_;
};

// Thread-local switch for graph recording; evaluation loops disable it.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

}  // namespace tslab
