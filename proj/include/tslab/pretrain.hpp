#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tslab/loss_curve.hpp"
#include "tslab/transformer.hpp"

namespace tslab {

// Byte-level vocabulary padded to the model's vocab_size:
//   0 pad (also the decoder start token), 1 end of sequence, 2 unknown,
//   3..258 the 256 byte values, then unused ids, and the last
//   `sentinels` ids as span sentinels (sentinel 0 is the highest id).
class CharVocab {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kEos = 1;
  static constexpr std::int32_t kUnk = 2;
  static constexpr std::int32_t kFirstByte = 3;

  explicit CharVocab(int size = 4096 + 32, int sentinels = 32);

  int size() const { return size_; }
  int sentinel_count() const { return sentinels_; }
  std::int32_t byte_id(unsigned char b) const { return kFirstByte + b; }
  std::int32_t sentinel(int k) const;
  bool is_sentinel(std::int32_t id) const { return id >= size_ - sentinels_ && id < size_; }

  std::vector<std::int32_t> encode(const std::string& text) const;
  // Specials are dropped; bytes are restored.
  std::string decode(const std::vector<std::int32_t>& ids) const;

 private:
  int size_;
  int sentinels_;
};

struct SpanCorruptionConfig {
  double rate = 0.15;
  double mean_span = 3.0;
  int sentinels = 32;

  void validate() const;
};

struct CorruptedPair {
  std::vector<std::int32_t> encoder;
  // Sentinel-delimited spans followed by end of sequence.
  std::vector<std::int32_t> target;
};

// T5-style span corruption. round(L * rate) tokens (at most L - 1) are masked
// in round(noise / mean_span) spans (at least one when anything is masked, at
// most the number of unmasked tokens and of sentinels). Span and gap lengths
// are random compositions; the sequence starts with an unmasked gap. For a
// fixed L the output lengths are fixed.
CorruptedPair span_corrupt(const std::vector<std::int32_t>& tokens, const SpanCorruptionConfig& config,
                           std::uint64_t seed, const CharVocab& vocab);

// Inverse used by tests and diagnostics.
std::vector<std::int32_t> span_reconstruct(const CorruptedPair& pair, const CharVocab& vocab);

struct PretrainConfig {
  std::int64_t steps = 2000;
  int batch_size = 8;
  int seq_len = 64;
  double lr = 1e-3;
  std::int64_t warmup_steps = 100;
  double weight_decay = 0.0;
  double clip_norm = 1.0;
  std::int64_t log_every = 50;
  std::uint64_t seed = 0;
  SpanCorruptionConfig corruption;

  void validate() const;
};

struct PretrainResult {
  ModelParams params;
  // Mean training loss per logging interval; the first point is the loss
  // before any update. tokens_seen counts encoder input tokens.
  LossCurve log;
};

// Called after each logged point; lets callers stream the curve to disk.
using LogCallback = std::function<void(const LossPoint&)>;

// Sequence-to-sequence loss with the language embedding and head. Decoder
// input is the target shifted right behind the pad token.
Tensor seq2seq_loss(const ModelParams& params, const ModelConfig& config,
                    const std::vector<std::vector<std::int32_t>>& encoder,
                    const std::vector<std::vector<std::int32_t>>& target);

// Span-corruption training on a byte corpus starting from init_random(config,
// seed). Throws DivergenceError on a non-finite loss; points logged so far
// have already reached the callback.
PretrainResult pretrain_language(const ModelConfig& config, const std::string& corpus, const PretrainConfig& train,
                                 const LogCallback& on_log = {});

struct InstructionPair {
  std::string prompt;
  std::string response;
};

// Templated tasks: reverse, max, min, sort, sum, count, upper, repeat.
std::vector<InstructionPair> generate_instruction_pairs(std::size_t n, std::uint64_t seed);

// Supervised prompt -> response tuning of existing weights. Examples of
// different lengths run as separate forwards whose losses are averaged.
PretrainResult tune_instruction_analog(const ModelParams& language_weights, const ModelConfig& config,
                                       const std::vector<InstructionPair>& pairs, const PretrainConfig& train,
                                       const LogCallback& on_log = {});

}  // namespace tslab
