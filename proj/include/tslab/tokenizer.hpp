#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tslab {

// Divisor used to scale one input window. `std` is the population standard
// deviation floored at eps, i.e. exactly the value the window was divided by.
struct NormalizationStats {
  double std = 1.0;
};

// Strictly increasing positive lag offsets.
struct LagSet {
  std::vector<int> lags{1, 2, 3, 7, 14, 24};

  void validate() const;
  int max_lag() const { return lags.empty() ? 0 : lags.back(); }
};

// B equal-width bins over [-a, a]; edge i sits at -a + i * 2a / B.
struct BinSpec {
  int bins = 4096;
  double half_range = 15.0;

  void validate() const;
  double width() const { return 2.0 * half_range / bins; }
  double edge(int i) const { return -half_range + i * width(); }
  double center(int i) const { return -half_range + (i + 0.5) * width(); }
};

enum class TokenKind { discrete, continuous };

// Either a list of bin indices (discrete) or T' row-major vectors of d_token
// floats (continuous).
struct TokenSequence {
  TokenKind kind = TokenKind::discrete;
  std::size_t d_token = 1;
  std::vector<std::int32_t> indices;
  std::vector<float> values;

  std::size_t size() const { return kind == TokenKind::discrete ? indices.size() : values.size() / d_token; }
  std::span<const float> vector(std::size_t t) const { return {values.data() + t * d_token, d_token}; }

  bool operator==(const TokenSequence&) const = default;
};

enum class TokenizerKind { naive, lag, bin };

std::string to_string(TokenizerKind kind);
TokenizerKind tokenizer_kind_from_string(const std::string& name);

struct TokenizerConfig {
  TokenizerKind kind = TokenizerKind::bin;
  BinSpec bins;
  LagSet lags;
  double eps = 1e-6;

  void validate() const;
  TokenKind token_kind() const { return kind == TokenizerKind::bin ? TokenKind::discrete : TokenKind::continuous; }
  std::size_t d_token() const;
  // Leading observations consumed before the first token (max lag, or 0).
  std::size_t history() const { return kind == TokenizerKind::lag ? static_cast<std::size_t>(lags.max_lag()) : 0; }
  // T' for an input of length T.
  std::size_t output_length(std::size_t input_length) const;
};

// x / max(std(x), eps) with std the population standard deviation,
// accumulated in double.
std::pair<std::vector<float>, NormalizationStats> normalize_window(std::span<const float> x, double eps = 1e-6);

TokenSequence tokenize_naive(std::span<const float> x);

// s_t = [x_t, x_{t-l1}, ..., x_{t-lp}] for every t with full history.
TokenSequence tokenize_lag(std::span<const float> x, const LagSet& lags);

// clamp(floor((v + a) * B / 2a), 0, B - 1); interior edges go to the upper bin.
std::int32_t bin_index(double v, const BinSpec& spec);
TokenSequence tokenize_bin(std::span<const float> x, const BinSpec& spec);

// Bin centers scaled back by the window's normalization divisor.
std::vector<float> detokenize_bin(std::span<const std::int32_t> indices, const BinSpec& spec,
                                  const NormalizationStats& stats);

TokenSequence tokenize(std::span<const float> normalized, const TokenizerConfig& config);

}  // namespace tslab
