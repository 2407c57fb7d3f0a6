#include "tslab/embedding.hpp"

#include <cmath>

#include "tslab/errors.hpp"
#include "tslab/ops.hpp"
#include "tslab/rng.hpp"

namespace tslab {

namespace {

Tensor truncated_normal(Shape shape, double std, Rng& rng) {
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = static_cast<float>(rng.truncated_normal(std));
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

std::size_t EmbeddingAdapter::d_model() const { return mode == TokenKind::discrete ? table.dim(1) : weight.dim(0); }

std::size_t EmbeddingAdapter::input_width() const {
  return mode == TokenKind::discrete ? table.dim(0) : weight.dim(1);
}

std::vector<Tensor> EmbeddingAdapter::parameters() const {
  if (mode == TokenKind::discrete) return {table};
  return {weight, bias};
}

Tensor embed(const EmbeddingAdapter& adapter, const TokenSequence& tokens) {
  if (tokens.kind != adapter.mode) {
    throw ContractError(std::string("embed: ") + (tokens.kind == TokenKind::discrete ? "discrete" : "continuous") +
                        " tokens given to a " +
                        (adapter.mode == TokenKind::discrete ? "discrete" : "continuous") + " adapter");
  }
  if (tokens.size() == 0) throw ContractError("embed: empty token sequence");
  if (adapter.mode == TokenKind::discrete) return embedding(adapter.table, tokens.indices);
  if (tokens.d_token != adapter.weight.dim(1)) {
    throw ContractError("embed: token width " + std::to_string(tokens.d_token) + " but adapter expects " +
                        std::to_string(adapter.weight.dim(1)));
  }
  const Tensor s = Tensor::from({tokens.size(), tokens.d_token}, tokens.values);
  return add(matmul(s, adapter.weight, true), adapter.bias);
}

Tensor embed_batch(const EmbeddingAdapter& adapter, std::span<const TokenSequence> batch) {
  if (batch.empty()) throw ContractError("embed_batch: empty batch");
  const std::size_t len = batch[0].size();
  TokenSequence joined;
  joined.kind = batch[0].kind;
  joined.d_token = batch[0].d_token;
  for (const auto& seq : batch) {
    if (seq.size() != len) {
      throw ContractError("embed_batch: sequence lengths differ (" + std::to_string(len) + " vs " +
                          std::to_string(seq.size()) + ")");
    }
    joined.indices.insert(joined.indices.end(), seq.indices.begin(), seq.indices.end());
    joined.values.insert(joined.values.end(), seq.values.begin(), seq.values.end());
  }
  return reshape(embed(adapter, joined), {batch.size(), len, adapter.d_model()});
}

EmbeddingAdapter init_adapter_random(const AdapterShape& shape, std::uint64_t seed) {
  if (shape.d_model == 0 || shape.width == 0) throw ConfigError("adapter dimensions must be positive");
  Rng rng(seed);
  EmbeddingAdapter a;
  a.mode = shape.mode;
  if (shape.mode == TokenKind::discrete) {
    a.table = truncated_normal({shape.width, shape.d_model}, 1.0 / std::sqrt(static_cast<double>(shape.d_model)), rng);
  } else {
    a.weight = truncated_normal({shape.d_model, shape.width}, 1.0 / std::sqrt(static_cast<double>(shape.width)), rng);
    a.bias = Tensor::zeros({shape.d_model}, true);
  }
  return a;
}

std::vector<double> mean_vocabulary_vector(const Tensor& vocab) {
  if (vocab.rank() != 2) throw DimensionError("vocabulary must be [V, d], got " + shape_str(vocab.shape()));
  const std::size_t rows = vocab.dim(0);
  const std::size_t d = vocab.dim(1);
  std::vector<double> mean(d, 0.0);
  const auto v = vocab.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += v[r * d + c];
  for (double& m : mean) m /= static_cast<double>(rows);
  return mean;
}

EmbeddingAdapter init_adapter_from_pretrained(TokenKind mode, const Tensor& vocab, std::size_t bins,
                                              std::size_t d_token, std::size_t extra_rows, std::uint64_t seed) {
  if (vocab.rank() != 2) throw DimensionError("vocabulary must be [V, d], got " + shape_str(vocab.shape()));
  if (!vocab.all_finite()) throw ContractError("pretrained vocabulary contains non-finite values");
  const std::size_t v_rows = vocab.dim(0);
  const std::size_t d = vocab.dim(1);
  EmbeddingAdapter a;
  a.mode = mode;
  if (mode == TokenKind::discrete) {
    if (v_rows < bins) {
      throw InsufficientVocabularyError("pretrained vocabulary has " + std::to_string(v_rows) + " rows, " +
                                        std::to_string(bins) + " bins need at least that many");
    }
    std::vector<float> rows(vocab.data().begin(), vocab.data().begin() + static_cast<std::ptrdiff_t>(bins * d));
    Rng rng(seed);
    const double std = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < extra_rows * d; ++i) rows.push_back(static_cast<float>(rng.truncated_normal(std)));
    a.table = Tensor::from({bins + extra_rows, d}, std::move(rows), true);
    return a;
  }
  if (d_token == 0) throw ConfigError("token width must be positive");
  const auto mean = mean_vocabulary_vector(vocab);
  std::vector<float> w(d * d_token);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d_token; ++c) w[r * d_token + c] = static_cast<float>(mean[r]);
  a.weight = Tensor::from({d, d_token}, std::move(w), true);
  a.bias = Tensor::zeros({d}, true);
  return a;
}

}  // namespace tslab
