#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "tslab/checkpoint.hpp"
#include "tslab/errors.hpp"
#include "tslab/grad_check.hpp"
#include "tslab/ops.hpp"
#include "tslab/rng.hpp"
#include "tslab/transformer.hpp"

namespace tslab {
namespace {

ModelConfig micro(int enc, int dec, int heads = 2, int d = 8, int ff = 16) {
  ModelConfig c;
  c.d_model = d;
  c.n_layers_enc = enc;
  c.n_layers_dec = dec;
  c.n_heads = heads;
  c.d_ff = ff;
  c.vocab_size = 11;
  c.rel_pos_buckets = 8;
  c.rel_pos_max_distance = 16;
  c.tier_name = "micro";
  return c;
}

Tensor random_states(Rng& rng, std::size_t b, std::size_t t, std::size_t d, bool grad = false) {
  std::vector<float> v(b * t * d);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return Tensor::from({b, t, d}, std::move(v), grad);
}

// Plain double-precision reference, one position at a time.
using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t, std::size_t batch) {
  const std::size_t rows = t.dim(1);
  const std::size_t cols = t.dim(2);
  Mat m(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m[r][c] = t.data()[(batch * rows + r) * cols + c];
  return m;
}

std::vector<double> vec_mat(const std::vector<double>& x, const Tensor& w) {
  const std::size_t n = w.dim(1);
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) y[j] += x[i] * w.data()[i * n + j];
  return y;
}

std::vector<double> ref_norm(const std::vector<double>& x, const Tensor& gain) {
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= static_cast<double>(x.size());
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / std::sqrt(ms + 1e-6) * gain.data()[i];
  return y;
}

int ref_bucket(int rel, bool bidirectional, int buckets, int max_distance) {
  int offset = 0;
  int n = -rel;
  if (bidirectional) {
    buckets /= 2;
    if (n < 0) offset = buckets;
    n = std::abs(n);
  } else if (n < 0) {
    n = 0;
  }
  const int exact = buckets / 2;
  if (n < exact) return offset + n;
  const int v = exact + static_cast<int>(std::log(n / static_cast<double>(exact)) /
                                         std::log(max_distance / static_cast<double>(exact)) * (buckets - exact));
  return offset + std::min(v, buckets - 1);
}

Mat ref_attention(const ModelParams& p, const std::string& pre, const ModelConfig& cfg, const Mat& xq, const Mat& xkv,
                  const Tensor* table, bool bidirectional, bool causal) {
  const int dh = cfg.head_dim();
  Mat q, k, v;
  for (const auto& r : xq) q.push_back(vec_mat(r, p.at(pre + "q")));
  for (const auto& r : xkv) k.push_back(vec_mat(r, p.at(pre + "k")));
  for (const auto& r : xkv) v.push_back(vec_mat(r, p.at(pre + "v")));
  Mat ctx(xq.size(), std::vector<double>(cfg.d_model, 0.0));
  for (int h = 0; h < cfg.n_heads; ++h) {
    for (std::size_t i = 0; i < xq.size(); ++i) {
      std::vector<double> s(xkv.size());
      double mx = -1e300;
      for (std::size_t j = 0; j < xkv.size(); ++j) {
        double dot = 0.0;
        for (int c = 0; c < dh; ++c) dot += q[i][h * dh + c] * k[j][h * dh + c];
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        if (table) {
          const int bkt = ref_bucket(static_cast<int>(j) - static_cast<int>(i), bidirectional, cfg.rel_pos_buckets,
                                     cfg.rel_pos_max_distance);
          s[j] += table->data()[bkt * cfg.n_heads + h];
        }
        if (causal && j > i) s[j] = -1e300;
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (double& e : s) z += (e = (e <= -1e299 ? 0.0 : std::exp(e - mx)));
      for (std::size_t j = 0; j < xkv.size(); ++j)
        for (int c = 0; c < dh; ++c) ctx[i][h * dh + c] += s[j] / z * v[j][h * dh + c];
    }
  }
  Mat out;
  for (const auto& r : ctx) out.push_back(vec_mat(r, p.at(pre + "o")));
  return out;
}

void ref_add(Mat& x, const Mat& y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j) x[i][j] += y[i][j];
}

Mat ref_ff(const ModelParams& p, const std::string& pre, const Mat& x) {
  Mat out;
  for (const auto& r : x) {
    auto h = vec_mat(ref_norm(r, p.at(pre + "ff_norm")), p.at(pre + "ff.wi"));
    for (double& e : h) e = std::max(e, 0.0);
    out.push_back(vec_mat(h, p.at(pre + "ff.wo")));
  }
  return out;
}

Mat norm_rows(const Mat& x, const Tensor& gain) {
  Mat out;
  for (const auto& r : x) out.push_back(ref_norm(r, gain));
  return out;
}

Mat ref_forward(const ModelParams& p, const ModelConfig& cfg, Mat enc, Mat dec) {
  for (int i = 0; i < cfg.n_layers_enc; ++i) {
    const std::string pre = "encoder.layer." + std::to_string(i) + ".";
    const Mat h = norm_rows(enc, p.at(pre + "attn_norm"));
    ref_add(enc, ref_attention(p, pre + "attn.", cfg, h, h, &p.at("encoder.rel_bias"), true, false));
    ref_add(enc, ref_ff(p, pre, enc));
  }
  const Mat mem = norm_rows(enc, p.at("encoder.final_norm"));
  for (int i = 0; i < cfg.n_layers_dec; ++i) {
    const std::string pre = "decoder.layer." + std::to_string(i) + ".";
    const Mat h = norm_rows(dec, p.at(pre + "self_norm"));
    ref_add(dec, ref_attention(p, pre + "self.", cfg, h, h, &p.at("decoder.rel_bias"), false, true));
    const Mat c = norm_rows(dec, p.at(pre + "cross_norm"));
    ref_add(dec, ref_attention(p, pre + "cross.", cfg, c, mem, nullptr, false, false));
    ref_add(dec, ref_ff(p, pre, dec));
  }
  return norm_rows(dec, p.at("decoder.final_norm"));
}

// Random gains so a wrong norm weight would show up in the oracle check.
void jitter_gains(ModelParams& params, Rng& rng) {
  for (auto& [name, t] : params) {
    if (name.find("norm") == std::string::npos) continue;
    std::vector<float> v(t.numel());
    for (float& x : v) x = static_cast<float>(rng.uniform(0.5, 1.5));
    t = Tensor::from(t.shape(), std::move(v), true);
  }
}

TEST(ModelConfig, TiersAndValidation) {
  const auto tiny = ModelConfig::tier("tiny");
  EXPECT_EQ(tiny.d_model, 64);
  EXPECT_EQ(tiny.n_layers_enc, 2);
  EXPECT_EQ(tiny.d_ff, 256);
  EXPECT_EQ(ModelConfig::tier("small").d_model, 128);
  EXPECT_EQ(ModelConfig::tier("base").n_heads, 8);
  EXPECT_THROW(ModelConfig::tier("xl"), ConfigError);
  ModelConfig bad = tiny;
  bad.n_heads = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(RelativeBucket, SmallOffsetsAreExact) {
  EXPECT_EQ(relative_position_bucket(0, true, 32, 128), 0);
  EXPECT_EQ(relative_position_bucket(-1, true, 32, 128), 1);
  EXPECT_EQ(relative_position_bucket(1, true, 32, 128), 17);
  EXPECT_EQ(relative_position_bucket(-1, false, 32, 128), 1);
  EXPECT_EQ(relative_position_bucket(3, false, 32, 128), 0);
  EXPECT_EQ(relative_position_bucket(-1000, false, 32, 128), 31);
  EXPECT_EQ(relative_position_bucket(1000, true, 32, 128), 31);
  for (bool bi : {true, false})
    for (int rel = -300; rel <= 300; ++rel) ASSERT_EQ(relative_position_bucket(rel, bi, 32, 128), ref_bucket(rel, bi, 32, 128)) << rel;
}

TEST(Forward, ShapeContract) {
  Rng rng(1);
  const auto cfg = micro(1, 2);
  const auto params = init_random(cfg, 3);
  for (auto [b, t, u] : {std::tuple{1u, 1u, 1u}, std::tuple{2u, 5u, 3u}, std::tuple{3u, 2u, 7u}}) {
    const Tensor out = forward(params, cfg, random_states(rng, b, t, 8), random_states(rng, b, u, 8));
    EXPECT_EQ(out.shape(), (Shape{b, u, 8}));
  }
  EXPECT_THROW(forward(params, cfg, random_states(rng, 1, 3, 6), random_states(rng, 1, 2, 8)), DimensionError);
  EXPECT_THROW(forward(params, cfg, random_states(rng, 2, 3, 8), random_states(rng, 1, 2, 8)), DimensionError);
}

TEST(Forward, MatchesStepByStepOracle) {
  Rng rng(5);
  for (auto [enc, dec, heads] : {std::tuple{1, 1, 1}, std::tuple{2, 2, 2}}) {
    const auto cfg = micro(enc, dec, heads);
    auto params = init_random(cfg, 11);
    jitter_gains(params, rng);
    const Tensor e = random_states(rng, 2, 3, 8);
    const Tensor d = random_states(rng, 2, 3, 8);
    const Tensor out = forward(params, cfg, e, d);
    for (std::size_t b = 0; b < 2; ++b) {
      const Mat ref = ref_forward(params, cfg, to_mat(e, b), to_mat(d, b));
      for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(out.at({b, u, c}), ref[u][c], 1e-5) << b << "," << u << "," << c;
    }
  }
}

TEST(Forward, DecoderIsCausal) {
  Rng rng(9);
  const auto cfg = micro(1, 2);
  const auto params = init_random(cfg, 2);
  const Tensor e = random_states(rng, 1, 4, 8);
  const Tensor d = random_states(rng, 1, 6, 8);
  const Tensor base = forward(params, cfg, e, d);
  for (std::size_t u0 = 0; u0 < 6; ++u0) {
    std::vector<float> v(d.data().begin(), d.data().end());
    for (std::size_t i = u0 * 8; i < v.size(); ++i) v[i] += static_cast<float>(rng.normal());
    const Tensor out = forward(params, cfg, e, Tensor::from({1, 6, 8}, v));
    for (std::size_t i = 0; i < u0 * 8; ++i) EXPECT_EQ(out.data()[i], base.data()[i]) << "u0=" << u0;
    if (u0 < 6) {
      bool changed = false;
      for (std::size_t i = u0 * 8; i < (u0 + 1) * 8; ++i) changed |= out.data()[i] != base.data()[i];
      EXPECT_TRUE(changed);
    }
  }
}

TEST(Forward, BatchEquivariance) {
  Rng rng(12);
  const auto cfg = micro(1, 1);
  const auto params = init_random(cfg, 4);
  const std::size_t b = 4, t = 3, u = 2, dm = 8;
  const Tensor e = random_states(rng, b, t, dm);
  const Tensor d = random_states(rng, b, u, dm);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  auto permute_batch = [&](const Tensor& x) {
    const std::size_t row = x.numel() / b;
    std::vector<float> v(x.numel());
    for (std::size_t i = 0; i < b; ++i)
      std::copy_n(x.data().begin() + perm[i] * row, row, v.begin() + i * row);
    return Tensor::from(x.shape(), std::move(v));
  };
  const Tensor out = forward(params, cfg, e, d);
  const Tensor out_p = forward(params, cfg, permute_batch(e), permute_batch(d));
  const Tensor expect = permute_batch(out);
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out_p.data()[i], expect.data()[i], 1e-6);
}

TEST(ParamCount, ClosedForm) {
  auto formula = [](const ModelConfig& c) {
    const std::int64_t d = c.d_model, ff = c.d_ff, v = c.vocab_size, rb = c.rel_pos_buckets * c.n_heads;
    std::int64_t n = 2 * v * d + 2 * d;
    if (c.n_layers_enc > 0) n += rb;
    if (c.n_layers_dec > 0) n += rb;
    n += c.n_layers_enc * (4 * d * d + 2 * d + 2 * d * ff);
    n += c.n_layers_dec * (8 * d * d + 3 * d + 2 * d * ff);
    return n;
  };
  for (const auto& name : ModelConfig::tier_names()) {
    const auto cfg = ModelConfig::tier(name);
    EXPECT_EQ(param_count(cfg), formula(cfg)) << name;
  }
  // tiny: 2*4128*64 + 128 + 2*128 + 2*(16384+128+32768) + 2*(32768+192+32768)
  EXPECT_EQ(param_count(ModelConfig::tier("tiny")), 528384 + 128 + 256 + 98560 + 131456);
  auto zero = ModelConfig::tier("tiny");
  zero.n_layers_enc = zero.n_layers_dec = 0;
  EXPECT_EQ(param_count(zero), 2 * 4128 * 64 + 2 * 64);
  auto doubled = ModelConfig::tier("tiny");
  doubled.d_ff *= 2;
  const auto base = ModelConfig::tier("tiny");
  EXPECT_EQ(param_count(doubled) - param_count(base),
            2 * (base.n_layers_enc + base.n_layers_dec) * base.d_model * base.d_ff);
  EXPECT_EQ(param_count(init_random(base, 1)), param_count(base));
  EXPECT_LT(param_count(ModelConfig::tier("tiny")) * 2, param_count(ModelConfig::tier("small")));
}

TEST(Init, DeterministicAndSeedSensitive) {
  const auto cfg = micro(1, 1);
  const auto a = init_random(cfg, 7);
  const auto b = init_random(cfg, 7);
  const auto c = init_random(cfg, 8);
  bool any_diff = false;
  for (const auto& [name, t] : a) {
    ASSERT_TRUE(std::equal(t.data().begin(), t.data().end(), b.at(name).data().begin())) << name;
    any_diff |= !std::equal(t.data().begin(), t.data().end(), c.at(name).data().begin());
  }
  EXPECT_TRUE(any_diff);
}

TEST(Init, SampleStdNearTarget) {
  const auto cfg = ModelConfig::tier("tiny");
  const auto params = init_random(cfg, 123);
  int checked = 0;
  for (const auto& spec : param_shapes(cfg)) {
    const Tensor& t = params.at(spec.name);
    ASSERT_TRUE(t.all_finite());
    if (spec.init_std == 0.0) {
      for (float v : t.data()) ASSERT_EQ(v, 1.0f);
      continue;
    }
    if (t.numel() < 4096) continue;
    double mean = 0.0, sq = 0.0;
    for (float v : t.data()) mean += v;
    mean /= t.numel();
    for (float v : t.data()) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / t.numel());
    EXPECT_NEAR(sd / spec.init_std, 1.0, 0.2) << spec.name;
    for (float v : t.data()) ASSERT_LE(std::abs(v), 2.0 * spec.init_std / 0.8796256610342398 + 1e-6) << spec.name;
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Forward, GradCheckOneLayer) {
  Rng rng(3);
  const auto cfg = micro(1, 1, 2, 8, 16);
  auto params = init_random(cfg, 5);
  jitter_gains(params, rng);
  const Tensor e = random_states(rng, 1, 3, 8, true);
  const Tensor d = random_states(rng, 1, 2, 8, true);
  std::vector<float> w(2 * 8);
  for (float& x : w) x = static_cast<float>(rng.normal());
  const Tensor probe = Tensor::from({1, 2, 8}, w);
  std::vector<Tensor> leaves{e, d};
  for (const auto& name : backbone_names(cfg)) leaves.push_back(params.at(name));
  // h = 1e-3 sits at the float32 round-off floor for this objective (max error ~1.1e-3).
  const auto report = grad_check([&] { return sum(mul(forward(params, cfg, e, d), probe)); }, leaves, 3e-3, 1e-3);
  EXPECT_TRUE(report.passed) << report.summary();
  EXPECT_LT(report.kink_crossings * 10, report.coordinates) << report.summary();
}

TEST(Checkpoint, RoundTripIsBitExactAndSizeMatches) {
  const auto cfg = micro(1, 2);
  const auto params = init_random(cfg, 42);
  const auto path = std::filesystem::temp_directory_path() / "tslab_ckpt_roundtrip.bin";
  save_checkpoint(params, path);
  std::uintmax_t expected = 12;
  for (const auto& [name, t] : params) expected += 3 + name.size() + 8 * t.rank() + 4 * t.numel();
  EXPECT_EQ(std::filesystem::file_size(path), expected);
  EXPECT_EQ(checkpoint_size(params), expected);
  const auto loaded = load_checkpoint(path);
  ASSERT_EQ(loaded.size(), params.size());
  for (const auto& [name, t] : params) {
    const Tensor& l = loaded.at(name);
    ASSERT_EQ(l.shape(), t.shape());
    ASSERT_EQ(std::memcmp(l.data().data(), t.data().data(), 4 * t.numel()), 0) << name;
  }
  EXPECT_NO_THROW(validate_params(loaded, cfg));
  std::filesystem::remove(path);
}

TEST(Checkpoint, HeaderBytes) {
  ModelParams p;
  p.emplace("w", Tensor::from({2}, {1.0f, -2.0f}));
  const auto path = std::filesystem::temp_directory_path() / "tslab_ckpt_header.bin";
  save_checkpoint(p, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::vector<unsigned char> expect{'T', 'S', 'T', 'L', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 'w', 1,
                                          2, 0, 0, 0, 0, 0, 0, 0, 0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  EXPECT_EQ(b, expect);
  std::filesystem::remove(path);
}

TEST(Checkpoint, FormatErrors) {
  const auto cfg = micro(1, 1);
  const auto params = init_random(cfg, 1);
  const auto dir = std::filesystem::temp_directory_path();
  const auto good = dir / "tslab_ckpt_good.bin";
  save_checkpoint(params, good);
  std::ifstream in(good, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto write = [&](const std::string& name, const std::string& content) {
    const auto p = dir / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  };
  auto kind_of = [](const std::filesystem::path& p) {
    try {
      load_checkpoint(p);
    } catch (const CheckpointError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error for " << p;
    return CheckpointError::Kind::io;
  };
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of(write("tslab_ckpt_magic.bin", bad_magic)), CheckpointError::Kind::bad_magic);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_EQ(kind_of(write("tslab_ckpt_version.bin", bad_version)), CheckpointError::Kind::bad_version);
  EXPECT_EQ(kind_of(write("tslab_ckpt_trunc.bin", bytes.substr(0, bytes.size() - 1))), CheckpointError::Kind::truncated);
  EXPECT_EQ(kind_of(write("tslab_ckpt_trunc2.bin", bytes.substr(0, 30))), CheckpointError::Kind::truncated);
  EXPECT_EQ(kind_of(dir / "tslab_ckpt_does_not_exist.bin"), CheckpointError::Kind::io);

  // Weights from a deeper model do not fit a shallower config and vice versa.
  try {
    validate_params(init_random(micro(2, 1), 1), cfg);
    ADD_FAILURE();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::unknown_tensor);
  }
  try {
    validate_params(params, micro(2, 1));
    ADD_FAILURE();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::missing_tensor);
  }
  try {
    validate_params(params, micro(1, 1, 2, 8, 32));
    ADD_FAILURE();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::shape_mismatch);
  }
  for (const char* n : {"tslab_ckpt_good.bin", "tslab_ckpt_magic.bin", "tslab_ckpt_version.bin", "tslab_ckpt_trunc.bin",
                        "tslab_ckpt_trunc2.bin"})
    std::filesystem::remove(dir / n);
}

}  // namespace
}  // namespace tslab
