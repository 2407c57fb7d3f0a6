#include "tslab/ts_model.hpp"

#include <algorithm>
#include <cmath>

#include "tslab/errors.hpp"
#include "tslab/ops.hpp"
#include "tslab/rng.hpp"

namespace tslab {

namespace {

TokenSequence last_tokens(const TokenSequence& seq, std::size_t n) {
  const std::size_t skip = seq.size() - n;
  TokenSequence out;
  out.kind = seq.kind;
  out.d_token = seq.d_token;
  if (seq.kind == TokenKind::discrete) {
    out.indices.assign(seq.indices.begin() + static_cast<std::ptrdiff_t>(skip), seq.indices.end());
  } else {
    out.values.assign(seq.values.begin() + static_cast<std::ptrdiff_t>(skip * seq.d_token), seq.values.end());
  }
  return out;
}

Tensor decode_logits(const TsModel& model, const Tensor& enc_states, const TokenSequence& dec) {
  const std::span<const TokenSequence> one(&dec, 1);
  return head_logits(model.head, decode(model.backbone, model.config, enc_states, embed_batch(model.adapter, one)));
}

}  // namespace

PreparedWindow prepare_window(const Window& window, const TokenizerConfig& tokenizer) {
  const std::size_t t_len = window.context.size();
  const std::size_t u_len = window.target.size();
  if (u_len == 0) throw ContractError("prepare_window: empty target");
  if (t_len <= tokenizer.history()) {
    throw InsufficientHistoryError("context of " + std::to_string(t_len) + " values is too short for the " +
                                   to_string(tokenizer.kind) + " tokenizer (needs more than " +
                                   std::to_string(tokenizer.history()) + ")");
  }
  PreparedWindow w;
  auto [ctx, stats] = normalize_window(window.context, tokenizer.eps);
  w.stats = stats;
  w.enc = tokenize(ctx, tokenizer);
  std::vector<float> z = std::move(ctx);
  z.reserve(t_len + u_len);
  for (float v : window.target) z.push_back(static_cast<float>(v / stats.std));
  w.targets.reserve(u_len);
  for (std::size_t u = 0; u < u_len; ++u) w.targets.push_back(bin_index(z[t_len + u], tokenizer.bins));
  const std::span<const float> prefix(z.data(), t_len + u_len - 1);
  w.dec = last_tokens(tokenize(prefix, tokenizer), u_len);
  return w;
}

std::vector<Tensor> TsModel::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : backbone) out.push_back(t);
  for (const auto& t : adapter.parameters()) out.push_back(t);
  out.push_back(head.weight);
  return out;
}

ModelParams TsModel::named() const {
  ModelParams out = backbone;
  if (adapter.mode == TokenKind::discrete) {
    out.emplace("adapter.table", adapter.table);
  } else {
    out.emplace("adapter.weight", adapter.weight);
    out.emplace("adapter.bias", adapter.bias);
  }
  out.emplace("head.weight", head.weight);
  return out;
}

Tensor ts_logits(const TsModel& model, std::span<const PreparedWindow> batch) {
  std::vector<TokenSequence> enc;
  std::vector<TokenSequence> dec;
  enc.reserve(batch.size());
  dec.reserve(batch.size());
  for (const auto& w : batch) {
    enc.push_back(w.enc);
    dec.push_back(w.dec);
  }
  const Tensor hidden = forward(model.backbone, model.config, embed_batch(model.adapter, enc),
                                embed_batch(model.adapter, dec));
  return head_logits(model.head, hidden);
}

Tensor ts_loss(const TsModel& model, std::span<const PreparedWindow> batch) {
  std::vector<std::int32_t> targets;
  for (const auto& w : batch) targets.insert(targets.end(), w.targets.begin(), w.targets.end());
  return nll_loss(ts_logits(model, batch), targets);
}

double evaluate_loss(const TsModel& model, std::span<const PreparedWindow> windows, std::size_t chunk) {
  if (windows.empty()) throw ContractError("evaluate_loss: no windows");
  NoGradGuard no_grad;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < windows.size(); i += chunk) {
    const auto part = windows.subspan(i, std::min(chunk, windows.size() - i));
    std::size_t n = 0;
    for (const auto& w : part) n += w.targets.size();
    total += static_cast<double>(ts_loss(model, part).item()) * static_cast<double>(n);
    count += n;
  }
  return total / static_cast<double>(count);
}

std::vector<float> forecast(const TsModel& model, std::span<const float> context, std::size_t horizon,
                            ForecastMode mode, std::uint64_t seed) {
  if (horizon == 0) throw ContractError("forecast: horizon must be at least 1");
  NoGradGuard no_grad;
  const TokenizerConfig& tok = model.tokenizer;
  auto [z, stats] = normalize_window(context, tok.eps);
  const TokenSequence enc_tokens = tokenize(z, tok);
  const std::span<const TokenSequence> one(&enc_tokens, 1);
  const Tensor enc_states = encode(model.backbone, model.config, embed_batch(model.adapter, one));
  Rng rng(seed);
  std::vector<std::int32_t> chosen;
  for (std::size_t u = 0; u < horizon; ++u) {
    const TokenSequence dec = last_tokens(tokenize(z, tok), u + 1);
    const Tensor logits = decode_logits(model, enc_states, dec);
    const std::size_t bins = model.head.bins();
    const auto row = logits.data().subspan(u * bins, bins);
    std::int32_t pick = 0;
    if (mode == ForecastMode::argmax) {
      pick = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
    } else {
      const float mx = *std::max_element(row.begin(), row.end());
      std::vector<double> p(bins);
      double z_sum = 0.0;
      for (std::size_t i = 0; i < bins; ++i) z_sum += (p[i] = std::exp(static_cast<double>(row[i]) - mx));
      double r = rng.uniform() * z_sum;
      pick = static_cast<std::int32_t>(bins - 1);
      for (std::size_t i = 0; i < bins; ++i) {
        r -= p[i];
        if (r < 0.0) {
          pick = static_cast<std::int32_t>(i);
          break;
        }
      }
    }
    chosen.push_back(pick);
    z.push_back(static_cast<float>(tok.bins.center(pick)));
  }
  return detokenize_bin(chosen, tok.bins, stats);
}

}  // namespace tslab
