#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tslab/tensor.hpp"

namespace tslab {

// Encoder-decoder backbone hyperparameters.
//
// Architecture, following the T5 family:
//   * pre-norm residual blocks with RMS norm (eps 1e-6) and no biases;
//   * no absolute position embeddings; a bucketed relative position bias is
//     learned once per stack (encoder bidirectional, decoder causal) and
//     shared by every self-attention layer of that stack;
//   * decoder blocks: causal self-attention, cross-attention over the
//     encoder output, ReLU feed-forward;
//   * separate (untied) input embedding and output projection.
struct ModelConfig {
  int d_model = 64;
  int n_layers_enc = 2;
  int n_layers_dec = 2;
  int n_heads = 4;
  int d_ff = 256;
  int vocab_size = 4096 + 32;
  int rel_pos_buckets = 32;
  int rel_pos_max_distance = 128;
  std::string tier_name = "tiny";

  void validate() const;
  int head_dim() const { return d_model / n_heads; }

  // tiny (64, 2+2, 4 heads, ff 256), small (128, 4+4, 4, 512),
  // base (256, 6+6, 8, 1024).
  static ModelConfig tier(const std::string& name);
  static std::vector<std::string> tier_names();

  bool operator==(const ModelConfig&) const = default;
};

// Weight name -> tensor. The name set and shapes are a pure function of the
// config (see param_shapes).
using ModelParams = std::map<std::string, Tensor>;

inline constexpr const char* kSharedEmbedding = "shared.embedding";
inline constexpr const char* kLmHead = "lm_head";

struct ParamSpec {
  std::string name;
  Shape shape;
  // Truncated-normal std; 0 marks norm gains, which start at one.
  double init_std = 0.0;
};

// Canonical ordered list of weights for a config.
std::vector<ParamSpec> param_shapes(const ModelConfig& config);

std::int64_t param_count(const ModelConfig& config);
std::int64_t param_count(const ModelParams& params);

// Truncated normal (cut at 2 sigma, rescaled to the target std): d_model^-0.5
// for the embedding, output projection and relative bias tables, fan_in^-0.5
// for every projection. Norm gains start at one.
ModelParams init_random(const ModelConfig& config, std::uint64_t seed);

// Tensors handed to the optimizer: everything except the language-model
// embedding and head, which time-series fine-tuning replaces.
std::vector<std::string> backbone_names(const ModelConfig& config);

// Throws CheckpointError when names or shapes differ from the config.
void validate_params(const ModelParams& params, const ModelConfig& config);

// T5 relative position bucket for key position minus query position.
int relative_position_bucket(int relative_position, bool bidirectional, int num_buckets, int max_distance);

// enc: [b, T, d_model] -> encoder states [b, T, d_model].
Tensor encode(const ModelParams& params, const ModelConfig& config, const Tensor& enc);

// Decoder states [b, U, d_model] given encoder states and embedded decoder
// inputs [b, U, d_model]. Self-attention is causally masked.
Tensor decode(const ModelParams& params, const ModelConfig& config, const Tensor& enc_states, const Tensor& dec);

Tensor forward(const ModelParams& params, const ModelConfig& config, const Tensor& enc, const Tensor& dec);

}  // namespace tslab
