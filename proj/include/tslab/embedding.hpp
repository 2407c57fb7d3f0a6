#pragma once

#include <cstdint>
#include <span>

#include "tslab/tensor.hpp"
#include "tslab/tokenizer.hpp"

namespace tslab {

// Input side of the time-series model. Discrete tokens index rows of
// `table` [rows, d_model]; continuous token vectors s_t map to
// weight * s_t + bias with weight [d_model, d_token].
struct EmbeddingAdapter {
  TokenKind mode = TokenKind::discrete;
  Tensor table;
  Tensor weight;
  Tensor bias;

  std::size_t d_model() const;
  // Rows of the lookup table (discrete) or token width (continuous).
  std::size_t input_width() const;
  std::vector<Tensor> parameters() const;
};

struct AdapterShape {
  TokenKind mode = TokenKind::discrete;
  std::size_t d_model = 64;
  // Discrete: number of lookup rows. Continuous: d_token.
  std::size_t width = 4096;
};

// [T', d_model]. Throws ContractError on a kind mismatch or an index outside
// the table.
Tensor embed(const EmbeddingAdapter& adapter, const TokenSequence& tokens);

// Sequences of equal length stacked to [b, T', d_model].
Tensor embed_batch(const EmbeddingAdapter& adapter, std::span<const TokenSequence> batch);

// Table std d_model^-0.5, weight std d_token^-0.5, bias zero.
EmbeddingAdapter init_adapter_random(const AdapterShape& shape, std::uint64_t seed);

// Discrete: the first `bins` rows of `vocab` [V, d_model] copied exactly,
// followed by `extra_rows` random rows for special tokens. Continuous: every
// column of the weight is the mean vocabulary vector; bias zero.
// Throws InsufficientVocabularyError when V < bins in discrete mode.
EmbeddingAdapter init_adapter_from_pretrained(TokenKind mode, const Tensor& vocab, std::size_t bins,
                                              std::size_t d_token, std::size_t extra_rows = 0,
                                              std::uint64_t seed = 0);

// Column mean of [V, d] accumulated in double.
std::vector<double> mean_vocabulary_vector(const Tensor& vocab);

}  // namespace tslab
