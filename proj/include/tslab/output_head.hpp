#pragma once

#include <cstdint>
#include <span>

#include "tslab/tensor.hpp"

namespace tslab {

// Projection from decoder states to logits over B bins, no bias.
struct CategoricalHead {
  Tensor weight;  // [B, d_model]

  std::size_t bins() const { return weight.dim(0); }
};

// Std d_model^-0.5.
CategoricalHead init_head_random(std::size_t bins, std::size_t d_model, std::uint64_t seed);

// hidden [..., d_model] -> logits [..., B].
Tensor head_logits(const CategoricalHead& head, const Tensor& hidden);

// Mean over unmasked positions of -log softmax(logits)[target]. Logits of any
// rank are flattened to [n, B]; an empty mask keeps every position.
Tensor nll_loss(const Tensor& logits, std::span<const std::int32_t> targets, std::span<const std::uint8_t> mask = {});

}  // namespace tslab
