#include "tslab/tokenizer.hpp"

#include <algorithm>
#include <cmath>

#include "tslab/errors.hpp"

namespace tslab {

void LagSet::validate() const {
  if (lags.empty()) throw ConfigError("lag set must not be empty");
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] <= 0) throw ConfigError("lags must be positive, got " + std::to_string(lags[i]));
    if (i > 0 && lags[i] <= lags[i - 1]) throw ConfigError("lags must be strictly increasing");
  }
}

void BinSpec::validate() const {
  if (bins < 2) throw ConfigError("bin count must be at least 2, got " + std::to_string(bins));
  if (!(half_range > 0.0) || !std::isfinite(half_range)) throw ConfigError("bin half-range must be positive");
}

std::string to_string(TokenizerKind kind) {
  switch (kind) {
    case TokenizerKind::naive: return "naive";
    case TokenizerKind::lag: return "lag";
    case TokenizerKind::bin: return "bin";
  }
  return "unknown";
}

TokenizerKind tokenizer_kind_from_string(const std::string& name) {
  if (name == "naive") return TokenizerKind::naive;
  if (name == "lag") return TokenizerKind::lag;
  if (name == "bin") return TokenizerKind::bin;
  throw ConfigError("unknown tokenizer '" + name + "' (expected naive, lag or bin)");
}

void TokenizerConfig::validate() const {
  bins.validate();
  if (kind == TokenizerKind::lag) lags.validate();
  if (!(eps > 0.0)) throw ConfigError("normalization eps must be positive");
}

std::size_t TokenizerConfig::d_token() const {
  switch (kind) {
    case TokenizerKind::naive: return 1;
    case TokenizerKind::lag: return 1 + lags.lags.size();
    case TokenizerKind::bin: return 1;
  }
  return 1;
}

std::size_t TokenizerConfig::output_length(std::size_t input_length) const {
  const std::size_t h = history();
  return input_length > h ? input_length - h : 0;
}

std::pair<std::vector<float>, NormalizationStats> normalize_window(std::span<const float> x, double eps) {
  if (x.empty()) throw ContractError("normalize_window: empty window");
  double mean = 0.0;
  for (float v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double divisor = std::max(std::sqrt(var), eps);
  std::vector<float> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>(x[i] / divisor);
  return {std::move(out), NormalizationStats{divisor}};
}

TokenSequence tokenize_naive(std::span<const float> x) {
  if (x.empty()) throw ContractError("tokenize_naive: empty series");
  TokenSequence seq;
  seq.kind = TokenKind::continuous;
  seq.d_token = 1;
  seq.values.assign(x.begin(), x.end());
  return seq;
}

TokenSequence tokenize_lag(std::span<const float> x, const LagSet& lags) {
  lags.validate();
  const std::size_t max_lag = static_cast<std::size_t>(lags.max_lag());
  if (x.size() <= max_lag) {
    throw InsufficientHistoryError("lag tokenizer needs more than " + std::to_string(max_lag) +
                                   " observations, got " + std::to_string(x.size()));
  }
  TokenSequence seq;
  seq.kind = TokenKind::continuous;
  seq.d_token = 1 + lags.lags.size();
  seq.values.reserve((x.size() - max_lag) * seq.d_token);
  for (std::size_t t = max_lag; t < x.size(); ++t) {
    seq.values.push_back(x[t]);
    for (int lag : lags.lags) seq.values.push_back(x[t - static_cast<std::size_t>(lag)]);
  }
  return seq;
}

std::int32_t bin_index(double v, const BinSpec& spec) {
  // (v + a) * B is exact for bin edges when a is dyadic, so edge values land
  // in the upper bin without rounding drift.
  const double scaled = (v + spec.half_range) * spec.bins / (2.0 * spec.half_range);
  if (!(scaled >= 0.0)) return 0;  // also catches NaN
  if (scaled >= spec.bins) return spec.bins - 1;
  return static_cast<std::int32_t>(std::floor(scaled));
}

TokenSequence tokenize_bin(std::span<const float> x, const BinSpec& spec) {
  spec.validate();
  if (x.empty()) throw ContractError("tokenize_bin: empty series");
  TokenSequence seq;
  seq.kind = TokenKind::discrete;
  seq.d_token = 1;
  seq.indices.reserve(x.size());
  for (float v : x) seq.indices.push_back(bin_index(v, spec));
  return seq;
}

std::vector<float> detokenize_bin(std::span<const std::int32_t> indices, const BinSpec& spec,
                                  const NormalizationStats& stats) {
  spec.validate();
  std::vector<float> out;
  out.reserve(indices.size());
  for (std::int32_t i : indices) {
    if (i < 0 || i >= spec.bins) {
      throw ContractError("detokenize_bin: index " + std::to_string(i) + " outside [0, " +
                          std::to_string(spec.bins) + ")");
    }
    out.push_back(static_cast<float>(spec.center(i) * stats.std));
  }
  return out;
}

TokenSequence tokenize(std::span<const float> normalized, const TokenizerConfig& config) {
  switch (config.kind) {
    case TokenizerKind::naive: return tokenize_naive(normalized);
    case TokenizerKind::lag: return tokenize_lag(normalized, config.lags);
    case TokenizerKind::bin: return tokenize_bin(normalized, config.bins);
  }
  throw ContractError("tokenize: unknown tokenizer kind");
}

}  // namespace tslab
