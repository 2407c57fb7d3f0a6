#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tslab/embedding.hpp"
#include "tslab/output_head.hpp"
#include "tslab/tokenizer.hpp"
#include "tslab/transformer.hpp"

namespace tslab {

// Raw (unnormalized) forecasting window.
struct Window {
  std::vector<float> context;
  std::vector<float> target;
};

// A window ready for teacher-forced training. The context is scaled by its
// own std and the target by the same divisor. Decoder input u is the token
// for the value just before target u, so decoding starts from the last
// context value; targets are always bin indices.
struct PreparedWindow {
  TokenSequence enc;
  TokenSequence dec;
  std::vector<std::int32_t> targets;
  NormalizationStats stats;
};

PreparedWindow prepare_window(const Window& window, const TokenizerConfig& tokenizer);

// Backbone, adapter and head of one time-series model. `backbone` holds the
// encoder/decoder weights only; the language embedding and head are not used.
struct TsModel {
  ModelConfig config;
  TokenizerConfig tokenizer;
  ModelParams backbone;
  EmbeddingAdapter adapter;
  CategoricalHead head;

  // Optimizer order: backbone (by name), adapter, head.
  std::vector<Tensor> parameters() const;
  // Flat name -> tensor map with "adapter." and "head." prefixes, for checkpoints.
  ModelParams named() const;
};

// Windows must share encoder and decoder lengths. Returns [b, U, B].
Tensor ts_logits(const TsModel& model, std::span<const PreparedWindow> batch);
Tensor ts_loss(const TsModel& model, std::span<const PreparedWindow> batch);

// Mean NLL over every target position, evaluated without a graph in chunks.
double evaluate_loss(const TsModel& model, std::span<const PreparedWindow> windows, std::size_t chunk = 32);

enum class ForecastMode { argmax, sample };

// Autoregressive forecast of `horizon` values in the units of `context`. Each
// step appends the chosen bin center to the series and re-tokenizes.
std::vector<float> forecast(const TsModel& model, std::span<const float> context, std::size_t horizon,
                            ForecastMode mode = ForecastMode::argmax, std::uint64_t seed = 0);

}  // namespace tslab
