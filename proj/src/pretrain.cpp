#include "tslab/pretrain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "tslab/errors.hpp"
#include "tslab/ops.hpp"
#include "tslab/optim.hpp"
#include "tslab/rng.hpp"

namespace tslab {

namespace {

// Random composition of n into k positive parts.
std::vector<std::size_t> random_composition(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> cuts(n - 1);
  std::iota(cuts.begin(), cuts.end(), std::size_t{1});
  rng.shuffle(cuts);
  cuts.resize(k - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::size_t> parts;
  std::size_t prev = 0;
  for (std::size_t c : cuts) {
    parts.push_back(c - prev);
    prev = c;
  }
  parts.push_back(n - prev);
  return parts;
}

Tensor embed_ids(const Tensor& table, const std::vector<std::vector<std::int32_t>>& rows) {
  std::vector<std::int32_t> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return reshape(embedding(table, flat), {rows.size(), rows[0].size(), table.dim(1)});
}

double lr_for_step(const PretrainConfig& train, std::int64_t step) {
  if (train.warmup_steps <= 0) return train.lr;
  return train.lr * std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(train.warmup_steps));
}

ModelParams deep_copy(const ModelParams& params) {
  ModelParams out;
  for (const auto& [name, t] : params) {
    Tensor c = t.clone();
    c.set_requires_grad(true);
    out.emplace(name, std::move(c));
  }
  return out;
}

// Shared optimization loop; `batch_loss(step)` builds the loss for one step
// and reports how many encoder tokens it consumed.
PretrainResult train_loop(const ModelParams& params, const PretrainConfig& train, const std::string& run_id,
                          const std::function<Tensor(std::int64_t, std::int64_t&)>& batch_loss,
                          const LogCallback& on_log) {
  PretrainResult result;
  result.log.run_id = run_id;
  result.log.seed = static_cast<std::int64_t>(train.seed);
  std::vector<Tensor> leaves;
  for (const auto& [name, t] : params) leaves.push_back(t);
  AdamW opt(leaves, {0.9, 0.999, 1e-8, train.weight_decay, train.clip_norm});
  std::int64_t tokens = 0;
  double interval_sum = 0.0;
  std::int64_t interval_n = 0;
  auto emit = [&](double loss) {
    const LossPoint p{static_cast<double>(tokens), loss};
    result.log.points.push_back(p);
    if (on_log) on_log(p);
  };
  for (std::int64_t step = 0; step < train.steps; ++step) {
    std::int64_t used = 0;
    opt.zero_grad();
    const Tensor loss = batch_loss(step, used);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw DivergenceError(run_id + ": non-finite training loss at step " + std::to_string(step));
    }
    if (step == 0) emit(value);
    loss.backward();
    opt.step(lr_for_step(train, step));
    tokens += used;
    interval_sum += value;
    ++interval_n;
    if ((step + 1) % train.log_every == 0 || step + 1 == train.steps) {
      emit(interval_sum / static_cast<double>(interval_n));
      interval_sum = 0.0;
      interval_n = 0;
    }
  }
  result.params = params;
  return result;
}

}  // namespace

CharVocab::CharVocab(int size, int sentinels) : size_(size), sentinels_(sentinels) {
  if (sentinels < 0) throw ConfigError("sentinel count must be non-negative");
  if (size < kFirstByte + 256 + sentinels) {
    throw ConfigError("vocabulary of " + std::to_string(size) + " ids cannot hold the byte range and " +
                      std::to_string(sentinels) + " sentinels");
  }
}

std::int32_t CharVocab::sentinel(int k) const {
  if (k < 0 || k >= sentinels_) throw ContractError("sentinel " + std::to_string(k) + " out of range");
  return size_ - 1 - k;
}

std::vector<std::int32_t> CharVocab::encode(const std::string& text) const {
  std::vector<std::int32_t> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(byte_id(static_cast<unsigned char>(c)));
  return ids;
}

std::string CharVocab::decode(const std::vector<std::int32_t>& ids) const {
  std::string out;
  for (std::int32_t id : ids) {
    if (id >= kFirstByte && id < kFirstByte + 256) out.push_back(static_cast<char>(id - kFirstByte));
  }
  return out;
}

void SpanCorruptionConfig::validate() const {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("corruption rate must lie in (0, 1)");
  if (!(mean_span >= 1.0)) throw ConfigError("mean span length must be at least 1");
  if (sentinels < 1) throw ConfigError("need at least one sentinel");
}

CorruptedPair span_corrupt(const std::vector<std::int32_t>& tokens, const SpanCorruptionConfig& config,
                           std::uint64_t seed, const CharVocab& vocab) {
  const std::size_t len = tokens.size();
  if (len < 2) throw ContractError("span_corrupt needs at least 2 tokens, got " + std::to_string(len));
  if (!(config.rate >= 0.0 && config.rate < 1.0) || !(config.mean_span >= 1.0)) {
    throw ConfigError("invalid span corruption parameters");
  }
  auto n_noise = static_cast<std::size_t>(std::llround(static_cast<double>(len) * config.rate));
  n_noise = std::min(n_noise, len - 1);
  CorruptedPair out;
  if (n_noise == 0) {
    out.encoder = tokens;
    out.target = {CharVocab::kEos};
    return out;
  }
  auto n_spans = static_cast<std::size_t>(std::llround(static_cast<double>(n_noise) / config.mean_span));
  n_spans = std::max<std::size_t>(n_spans, 1);
  n_spans = std::min({n_spans, n_noise, len - n_noise, static_cast<std::size_t>(config.sentinels),
                      static_cast<std::size_t>(vocab.sentinel_count())});
  Rng rng(seed);
  const auto noise = random_composition(n_noise, n_spans, rng);
  const auto keep = random_composition(len - n_noise, n_spans, rng);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n_spans; ++i) {
    out.encoder.insert(out.encoder.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                       tokens.begin() + static_cast<std::ptrdiff_t>(pos + keep[i]));
    pos += keep[i];
    const std::int32_t s = vocab.sentinel(static_cast<int>(i));
    out.encoder.push_back(s);
    out.target.push_back(s);
    out.target.insert(out.target.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                      tokens.begin() + static_cast<std::ptrdiff_t>(pos + noise[i]));
    pos += noise[i];
  }
  out.target.push_back(CharVocab::kEos);
  return out;
}

std::vector<std::int32_t> span_reconstruct(const CorruptedPair& pair, const CharVocab& vocab) {
  std::vector<std::int32_t> out;
  for (std::int32_t id : pair.encoder) {
    if (!vocab.is_sentinel(id)) {
      out.push_back(id);
      continue;
    }
    auto it = std::find(pair.target.begin(), pair.target.end(), id);
    if (it == pair.target.end()) throw ContractError("sentinel missing from target");
    for (++it; it != pair.target.end() && !vocab.is_sentinel(*it) && *it != CharVocab::kEos; ++it) out.push_back(*it);
  }
  return out;
}

void PretrainConfig::validate() const {
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (seq_len < 2) throw ConfigError("sequence length must be at least 2");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (log_every < 1) throw ConfigError("log interval must be at least 1");
  corruption.validate();
}

Tensor seq2seq_loss(const ModelParams& params, const ModelConfig& config,
                    const std::vector<std::vector<std::int32_t>>& encoder,
                    const std::vector<std::vector<std::int32_t>>& target) {
  if (encoder.empty() || encoder.size() != target.size()) throw ContractError("seq2seq_loss: bad batch");
  std::vector<std::vector<std::int32_t>> dec_in;
  std::vector<std::int32_t> flat_target;
  for (const auto& t : target) {
    std::vector<std::int32_t> shifted{CharVocab::kPad};
    shifted.insert(shifted.end(), t.begin(), t.end() - 1);
    dec_in.push_back(std::move(shifted));
    flat_target.insert(flat_target.end(), t.begin(), t.end());
  }
  const Tensor& table = params.at(kSharedEmbedding);
  const Tensor hidden = forward(params, config, embed_ids(table, encoder), embed_ids(table, dec_in));
  const Tensor logits = matmul(hidden, params.at(kLmHead), true);
  return cross_entropy(reshape(logits, {flat_target.size(), static_cast<std::size_t>(config.vocab_size)}),
                       flat_target);
}

PretrainResult pretrain_language(const ModelConfig& config, const std::string& corpus, const PretrainConfig& train,
                                 const LogCallback& on_log) {
  train.validate();
  if (corpus.empty()) throw ContractError("pretraining corpus is empty");
  if (corpus.size() < static_cast<std::size_t>(train.seq_len)) {
    throw ContractError("corpus of " + std::to_string(corpus.size()) + " bytes is shorter than one sequence (" +
                        std::to_string(train.seq_len) + ")");
  }
  const CharVocab vocab(config.vocab_size, train.corruption.sentinels);
  const ModelParams params = init_random(config, train.seed);
  Rng data_rng(Rng::derive(train.seed, 1));
  const std::size_t span = corpus.size() - static_cast<std::size_t>(train.seq_len) + 1;
  auto batch_loss = [&](std::int64_t, std::int64_t& used) {
    std::vector<std::vector<std::int32_t>> enc, tgt;
    for (int b = 0; b < train.batch_size; ++b) {
      const std::size_t off = data_rng.below(span);
      const auto ids = vocab.encode(corpus.substr(off, static_cast<std::size_t>(train.seq_len)));
      auto pair = span_corrupt(ids, train.corruption, data_rng.next_u64(), vocab);
      used += static_cast<std::int64_t>(pair.encoder.size());
      enc.push_back(std::move(pair.encoder));
      tgt.push_back(std::move(pair.target));
    }
    return seq2seq_loss(params, config, enc, tgt);
  };
  return train_loop(params, train, "language_" + config.tier_name + "_s" + std::to_string(train.seed), batch_loss,
                    on_log);
}

std::vector<InstructionPair> generate_instruction_pairs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  auto letters = [&](std::size_t lo, std::size_t hi) {
    std::string s;
    const std::size_t len = lo + rng.below(hi - lo + 1);
    for (std::size_t i = 0; i < len; ++i) s.push_back(static_cast<char>('a' + rng.below(26)));
    return s;
  };
  auto numbers = [&](std::size_t count, int hi) {
    std::vector<int> v;
    for (std::size_t i = 0; i < count; ++i) v.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(hi))));
    return v;
  };
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
    return s;
  };
  std::vector<InstructionPair> out;
  out.reserve(n);
  while (out.size() < n) {
    switch (rng.below(9)) {
      case 0: {
        const auto w = letters(3, 8);
        out.push_back({"reverse: " + w, std::string(w.rbegin(), w.rend())});
        break;
      }
      case 1: {
        const auto v = numbers(3 + rng.below(4), 100);
        out.push_back({"max: " + join(v), std::to_string(*std::max_element(v.begin(), v.end()))});
        break;
      }
      case 2: {
        const auto v = numbers(3 + rng.below(4), 100);
        out.push_back({"min: " + join(v), std::to_string(*std::min_element(v.begin(), v.end()))});
        break;
      }
      case 3: {
        auto v = numbers(3 + rng.below(3), 50);
        const std::string prompt = "sort: " + join(v);
        std::sort(v.begin(), v.end());
        out.push_back({prompt, join(v)});
        break;
      }
      case 4: {
        const auto v = numbers(2, 500);
        out.push_back({"sum: " + join(v), std::to_string(v[0] + v[1])});
        break;
      }
      case 5: {
        const auto w = letters(5, 12);
        const char c = w[rng.below(w.size())];
        out.push_back({std::string("count ") + c + ": " + w, std::to_string(std::count(w.begin(), w.end(), c))});
        break;
      }
      case 6: {
        auto w = letters(3, 8);
        const std::string prompt = "upper: " + w;
        for (char& ch : w) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        out.push_back({prompt, w});
        break;
      }
      case 7: {
        const auto w = letters(1, 3);
        const int k = 2 + static_cast<int>(rng.below(3));
        std::string r;
        for (int i = 0; i < k; ++i) r += w;
        out.push_back({"repeat " + std::to_string(k) + ": " + w, r});
        break;
      }
      default: {
        const int start = static_cast<int>(rng.below(50));
        const int step = static_cast<int>(rng.below(9)) - 4;
        std::vector<int> v;
        for (int i = 0; i < 4; ++i) v.push_back(start + i * step);
        out.push_back({"next: " + join(v), std::to_string(start + 4 * step)});
        break;
      }
    }
  }
  return out;
}

PretrainResult tune_instruction_analog(const ModelParams& language_weights, const ModelConfig& config,
                                       const std::vector<InstructionPair>& pairs, const PretrainConfig& train,
                                       const LogCallback& on_log) {
  train.validate();
  validate_params(language_weights, config);
  if (pairs.empty()) throw ContractError("instruction tuning needs at least one prompt/response pair");
  const CharVocab vocab(config.vocab_size, train.corruption.sentinels);
  const ModelParams params = deep_copy(language_weights);
  Rng data_rng(Rng::derive(train.seed, 2));
  auto batch_loss = [&](std::int64_t, std::int64_t& used) {
    Tensor total;
    for (int b = 0; b < train.batch_size; ++b) {
      const auto& pair = pairs[data_rng.below(pairs.size())];
      auto enc = vocab.encode(pair.prompt);
      enc.push_back(CharVocab::kEos);
      auto tgt = vocab.encode(pair.response);
      tgt.push_back(CharVocab::kEos);
      used += static_cast<std::int64_t>(enc.size());
      const Tensor l = seq2seq_loss(params, config, {enc}, {tgt});
      total = total.defined() ? add(total, l) : l;
    }
    return scale(total, 1.0f / static_cast<float>(train.batch_size));
  };
  return train_loop(params, train, "instruct_" + config.tier_name + "_s" + std::to_string(train.seed), batch_loss,
                    on_log);
}

}  // namespace tslab
