#include "tslab/output_head.hpp"

#include <cmath>

#include "tslab/errors.hpp"
#include "tslab/ops.hpp"
#include "tslab/rng.hpp"

namespace tslab {

CategoricalHead init_head_random(std::size_t bins, std::size_t d_model, std::uint64_t seed) {
  if (bins == 0 || d_model == 0) throw ConfigError("head dimensions must be positive");
  Rng rng(seed);
  const double std = 1.0 / std::sqrt(static_cast<double>(d_model));
  std::vector<float> w(bins * d_model);
  for (float& x : w) x = static_cast<float>(rng.truncated_normal(std));
  return {Tensor::from({bins, d_model}, std::move(w), true)};
}

Tensor head_logits(const CategoricalHead& head, const Tensor& hidden) {
  if (hidden.shape().back() != head.weight.dim(1)) {
    throw DimensionError("head expects hidden width " + std::to_string(head.weight.dim(1)) + ", got " +
                         shape_str(hidden.shape()));
  }
  return matmul(hidden, head.weight, true);
}

Tensor nll_loss(const Tensor& logits, std::span<const std::int32_t> targets, std::span<const std::uint8_t> mask) {
  const std::size_t bins = logits.shape().back();
  const std::size_t n = logits.numel() / bins;
  if (targets.size() != n) {
    throw DimensionError("nll_loss: " + std::to_string(n) + " positions but " + std::to_string(targets.size()) +
                         " targets");
  }
  return cross_entropy(logits.rank() == 2 ? logits : reshape(logits, {n, bins}), targets, mask);
}

}  // namespace tslab
