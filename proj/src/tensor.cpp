#include "tslab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "tslab/errors.hpp"

namespace tslab {

namespace {

thread_local bool g_grad_enabled = true;
thread_local std::uint64_t g_next_seq = 1;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_mode_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  node->seq = g_next_seq++;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<float> Tensor::data() { return node_->data; }
std::span<const float> Tensor::data() const { return node_->data; }

float Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::item_exact() const {
  const float v = item();
  return std::isnan(node_->exact) ? v : node_->exact;
}

float Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw DimensionError("index rank does not match " + shape_str(s));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw DimensionError("index out of range for " + shape_str(s));
    flat = flat * s[axis] + i;
    ++axis;
  }
  return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool value) { node_->requires_grad = value; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const float> Tensor::grad() const { return node_->grad; }
std::span<float> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

Tensor Tensor::clone() const { return from(shape(), node_->data, requires_grad()); }

bool Tensor::all_finite() const {
  return std::all_of(node_->data.begin(), node_->data.end(), [](float v) { return std::isfinite(v); });
}

Tensor Tensor::make_result(Shape shape, std::vector<float> values, std::vector<Tensor> inputs,
                           std::function<void(detail::TensorNode&)> backward_fn) {
  Tensor out = from(std::move(shape), std::move(values), false);
  if (!g_grad_enabled) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(inputs.size());
  for (auto& t : inputs) out.node_->parents.push_back(t.node_);
  out.node_->backward_fn = std::move(backward_fn);
  return out;
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!requires_grad()) return;

  std::vector<detail::TensorNode*> order;
  std::vector<detail::TensorNode*> stack{node_.get()};
  // Nodes are reachable through several paths; a visited set keeps each once.
  std::unordered_set<detail::TensorNode*> seen;
  while (!stack.empty()) {
    detail::TensorNode* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::TensorNode* a, const detail::TensorNode* b) { return a->seq > b->seq; });

  node_->ensure_grad()[0] += 1.0f;
  for (detail::TensorNode* n : order) {
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
}

}  // namespace tslab
