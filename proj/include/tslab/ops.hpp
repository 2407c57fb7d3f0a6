#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tslab/tensor.hpp"

namespace tslab {

// Elementwise binary ops. `b` must have the same shape as `a` or a shape
// equal to a trailing suffix of `a`'s shape; it is then broadcast over the
// leading axes (bias vectors, shared attention biases, masks).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, float factor);
Tensor relu(const Tensor& x);

// While alive, fingerprints the sign pattern of every relu input evaluated on
// this thread. Equal fingerprints mean two forward passes took the same side
// of every kink.
class ReluPatternProbe {
 public:
  ReluPatternProbe();
  ~ReluPatternProbe();
  ReluPatternProbe(const ReluPatternProbe&) = delete;
  ReluPatternProbe& operator=(const ReluPatternProbe&) = delete;

  void record(std::span<const float> x);
  // Fingerprint since construction or the previous take().
  std::uint64_t take();

 private:
  ReluPatternProbe* previous_;
  std::uint64_t hash_;
};

// Tanh approximation:
//   gelu(x) = 0.5 x (1 + tanh(0.7978845608 (x + 0.044715 x^3)))
// where 0.7978845608 = sqrt(2 / pi).
Tensor gelu(const Tensor& x);

// a[..., k] x b[k, n] -> [..., n]; with trans_b, b is [n, k] and the
// product uses its transpose.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_b = false);

// Batched product over a shared leading axis: a[g, m, k] x b[g, k, n]
// (or b[g, n, k] with trans_b) -> [g, m, n].
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);

// Softmax over the last axis, computed with max subtraction.
Tensor softmax(const Tensor& x);

// gain * x / sqrt(mean(x^2) + eps) over the last axis.
Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps);

// Gathers rows of table[v, d] -> [indices.size(), d].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> indices);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean over unmasked rows of -log softmax(logits[i])[targets[i]].
// logits is [n, c]; an empty mask means every row counts.
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                     std::span<const std::uint8_t> mask = {});

}  // namespace tslab
