#include "tslab/transformer.hpp"

#include <cmath>
#include <set>

#include "tslab/errors.hpp"
#include "tslab/ops.hpp"
#include "tslab/rng.hpp"

namespace tslab {

namespace {

constexpr float kNormEps = 1e-6f;
constexpr float kMaskValue = -1e9f;

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

const Tensor& get(const ModelParams& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("missing model weight '" + name + "'");
  return it->second;
}

std::string layer_prefix(const char* stack, int i) { return std::string(stack) + ".layer." + std::to_string(i) + "."; }

// Bias[h, q, k] gathered from a [buckets, heads] table.
Tensor position_bias(const Tensor& table, std::size_t q_len, std::size_t k_len, bool bidirectional,
                     const ModelConfig& cfg) {
  std::vector<std::int32_t> buckets(q_len * k_len);
  for (std::size_t q = 0; q < q_len; ++q) {
    for (std::size_t k = 0; k < k_len; ++k) {
      const int rel = static_cast<int>(k) - static_cast<int>(q);
      buckets[q * k_len + k] =
          relative_position_bucket(rel, bidirectional, cfg.rel_pos_buckets, cfg.rel_pos_max_distance);
    }
  }
  const Tensor rows = embedding(table, buckets);  // [q*k, heads]
  return permute(reshape(rows, {q_len, k_len, sz(cfg.n_heads)}), {2, 0, 1});
}

Tensor causal_mask(std::size_t len) {
  std::vector<float> m(len * len, 0.0f);
  for (std::size_t q = 0; q < len; ++q)
    for (std::size_t k = q + 1; k < len; ++k) m[q * len + k] = kMaskValue;
  return Tensor::from({len, len}, std::move(m));
}

// [b, t, d] -> [b * heads, t, head_dim]
Tensor split_heads(const Tensor& x, std::size_t b, std::size_t t, std::size_t heads, std::size_t dh) {
  return reshape(permute(reshape(x, {b, t, heads, dh}), {0, 2, 1, 3}), {b * heads, t, dh});
}

Tensor merge_heads(const Tensor& x, std::size_t b, std::size_t t, std::size_t heads, std::size_t dh) {
  return reshape(permute(reshape(x, {b, heads, t, dh}), {0, 2, 1, 3}), {b, t, heads * dh});
}

Tensor attention(const ModelParams& p, const std::string& prefix, const ModelConfig& cfg, const Tensor& xq,
                 const Tensor& xkv, const Tensor* bias, const Tensor* mask) {
  const std::size_t b = xq.dim(0);
  const std::size_t tq = xq.dim(1);
  const std::size_t tk = xkv.dim(1);
  const std::size_t heads = sz(cfg.n_heads);
  const std::size_t dh = sz(cfg.head_dim());
  const Tensor q = split_heads(matmul(xq, get(p, prefix + "q")), b, tq, heads, dh);
  const Tensor k = split_heads(matmul(xkv, get(p, prefix + "k")), b, tk, heads, dh);
  const Tensor v = split_heads(matmul(xkv, get(p, prefix + "v")), b, tk, heads, dh);
  Tensor scores = scale(bmm(q, k, true), 1.0f / std::sqrt(static_cast<float>(dh)));
  scores = reshape(scores, {b, heads, tq, tk});
  if (bias) scores = add(scores, *bias);
  if (mask) scores = add(scores, *mask);
  const Tensor probs = reshape(softmax(scores), {b * heads, tq, tk});
  const Tensor ctx = merge_heads(bmm(probs, v), b, tq, heads, dh);
  return matmul(ctx, get(p, prefix + "o"));
}

Tensor feed_forward(const ModelParams& p, const std::string& prefix, const Tensor& x) {
  return matmul(relu(matmul(x, get(p, prefix + "ff.wi"))), get(p, prefix + "ff.wo"));
}

void check_states(const Tensor& x, const ModelConfig& cfg, const char* what) {
  if (x.rank() != 3 || x.dim(2) != sz(cfg.d_model)) {
    throw DimensionError(std::string(what) + " must be [batch, length, " + std::to_string(cfg.d_model) + "], got " +
                         shape_str(x.shape()));
  }
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(d_ff, "d_ff");
  positive(vocab_size, "vocab_size");
  positive(rel_pos_buckets, "rel_pos_buckets");
  positive(rel_pos_max_distance, "rel_pos_max_distance");
  if (n_layers_enc < 0 || n_layers_dec < 0) throw ConfigError("layer counts must be non-negative");
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (rel_pos_buckets < 4) throw ConfigError("rel_pos_buckets must be at least 4");
}

ModelConfig ModelConfig::tier(const std::string& name) {
  ModelConfig c;
  c.tier_name = name;
  if (name == "tiny") {
    c.d_model = 64, c.n_layers_enc = 2, c.n_layers_dec = 2, c.n_heads = 4, c.d_ff = 256;
  } else if (name == "small") {
    c.d_model = 128, c.n_layers_enc = 4, c.n_layers_dec = 4, c.n_heads = 4, c.d_ff = 512;
  } else if (name == "base") {
    c.d_model = 256, c.n_layers_enc = 6, c.n_layers_dec = 6, c.n_heads = 8, c.d_ff = 1024;
  } else {
    throw ConfigError("unknown model tier '" + name + "' (expected tiny, small or base)");
  }
  return c;
}

std::vector<std::string> ModelConfig::tier_names() { return {"tiny", "small", "base"}; }

std::vector<ParamSpec> param_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = sz(cfg.d_model);
  const std::size_t ff = sz(cfg.d_ff);
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
  const double proj_std = emb_std;
  const double ff_out_std = 1.0 / std::sqrt(static_cast<double>(ff));
  std::vector<ParamSpec> out;
  out.push_back({kSharedEmbedding, {sz(cfg.vocab_size), d}, emb_std});
  out.push_back({kLmHead, {sz(cfg.vocab_size), d}, emb_std});

  auto attn = [&](const std::string& prefix) {
    for (const char* w : {"q", "k", "v", "o"}) out.push_back({prefix + w, {d, d}, proj_std});
  };
  auto ffn = [&](const std::string& prefix) {
    out.push_back({prefix + "ff_norm", {d}, 0.0});
    out.push_back({prefix + "ff.wi", {d, ff}, proj_std});
    out.push_back({prefix + "ff.wo", {ff, d}, ff_out_std});
  };

  if (cfg.n_layers_enc > 0) {
    out.push_back({"encoder.rel_bias", {sz(cfg.rel_pos_buckets), sz(cfg.n_heads)}, emb_std});
  }
  for (int i = 0; i < cfg.n_layers_enc; ++i) {
    const std::string pre = layer_prefix("encoder", i);
    out.push_back({pre + "attn_norm", {d}, 0.0});
    attn(pre + "attn.");
    ffn(pre);
  }
  out.push_back({"encoder.final_norm", {d}, 0.0});

  if (cfg.n_layers_dec > 0) {
    out.push_back({"decoder.rel_bias", {sz(cfg.rel_pos_buckets), sz(cfg.n_heads)}, emb_std});
  }
  for (int i = 0; i < cfg.n_layers_dec; ++i) {
    const std::string pre = layer_prefix("decoder", i);
    out.push_back({pre + "self_norm", {d}, 0.0});
    attn(pre + "self.");
    out.push_back({pre + "cross_norm", {d}, 0.0});
    attn(pre + "cross.");
    ffn(pre);
  }
  out.push_back({"decoder.final_norm", {d}, 0.0});
  return out;
}

std::int64_t param_count(const ModelConfig& config) {
  std::int64_t n = 0;
  for (const auto& spec : param_shapes(config)) n += static_cast<std::int64_t>(shape_numel(spec.shape));
  return n;
}

std::int64_t param_count(const ModelParams& params) {
  std::int64_t n = 0;
  for (const auto& [name, t] : params) n += static_cast<std::int64_t>(t.numel());
  return n;
}

ModelParams init_random(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  ModelParams params;
  for (const auto& spec : param_shapes(config)) {
    std::vector<float> v(shape_numel(spec.shape));
    if (spec.init_std == 0.0) {
      std::fill(v.begin(), v.end(), 1.0f);
    } else {
      for (float& x : v) x = static_cast<float>(rng.truncated_normal(spec.init_std));
    }
    params.emplace(spec.name, Tensor::from(spec.shape, std::move(v), true));
  }
  return params;
}

std::vector<std::string> backbone_names(const ModelConfig& config) {
  std::vector<std::string> names;
  for (const auto& spec : param_shapes(config)) {
    if (spec.name != kSharedEmbedding && spec.name != kLmHead) names.push_back(spec.name);
  }
  return names;
}

int relative_position_bucket(int relative_position, bool bidirectional, int num_buckets, int max_distance) {
  int bucket = 0;
  int n;
  if (bidirectional) {
    num_buckets /= 2;
    if (relative_position > 0) bucket += num_buckets;
    n = std::abs(relative_position);
  } else {
    n = std::max(-relative_position, 0);
  }
  const int max_exact = num_buckets / 2;
  if (n < max_exact) return bucket + n;
  const float scaled = std::log(static_cast<float>(n) / max_exact) /
                       std::log(static_cast<float>(max_distance) / max_exact) *
                       static_cast<float>(num_buckets - max_exact);
  const int large = std::min(max_exact + static_cast<int>(scaled), num_buckets - 1);
  return bucket + large;
}

Tensor encode(const ModelParams& p, const ModelConfig& cfg, const Tensor& enc) {
  check_states(enc, cfg, "encoder input");
  Tensor x = enc;
  Tensor bias;
  if (cfg.n_layers_enc > 0) bias = position_bias(get(p, "encoder.rel_bias"), enc.dim(1), enc.dim(1), true, cfg);
  for (int i = 0; i < cfg.n_layers_enc; ++i) {
    const std::string pre = layer_prefix("encoder", i);
    const Tensor h = rms_norm(x, get(p, pre + "attn_norm"), kNormEps);
    x = add(x, attention(p, pre + "attn.", cfg, h, h, &bias, nullptr));
    x = add(x, feed_forward(p, pre, rms_norm(x, get(p, pre + "ff_norm"), kNormEps)));
  }
  return rms_norm(x, get(p, "encoder.final_norm"), kNormEps);
}

Tensor decode(const ModelParams& p, const ModelConfig& cfg, const Tensor& enc_states, const Tensor& dec) {
  check_states(enc_states, cfg, "encoder states");
  check_states(dec, cfg, "decoder input");
  if (enc_states.dim(0) != dec.dim(0)) {
    throw DimensionError("batch sizes differ: encoder " + shape_str(enc_states.shape()) + ", decoder " +
                         shape_str(dec.shape()));
  }
  const std::size_t len = dec.dim(1);
  Tensor x = dec;
  Tensor bias;
  Tensor mask;
  if (cfg.n_layers_dec > 0) {
    bias = position_bias(get(p, "decoder.rel_bias"), len, len, false, cfg);
    mask = causal_mask(len);
  }
  for (int i = 0; i < cfg.n_layers_dec; ++i) {
    const std::string pre = layer_prefix("decoder", i);
    const Tensor h = rms_norm(x, get(p, pre + "self_norm"), kNormEps);
    x = add(x, attention(p, pre + "self.", cfg, h, h, &bias, &mask));
    const Tensor c = rms_norm(x, get(p, pre + "cross_norm"), kNormEps);
    x = add(x, attention(p, pre + "cross.", cfg, c, enc_states, nullptr, nullptr));
    x = add(x, feed_forward(p, pre, rms_norm(x, get(p, pre + "ff_norm"), kNormEps)));
  }
  return rms_norm(x, get(p, "decoder.final_norm"), kNormEps);
}

Tensor forward(const ModelParams& params, const ModelConfig& config, const Tensor& enc, const Tensor& dec) {
  return decode(params, config, encode(params, config, enc), dec);
}

}  // namespace tslab
