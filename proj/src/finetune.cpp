#include "tslab/finetune.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "tslab/checkpoint.hpp"
#include "tslab/errors.hpp"
#include "tslab/optim.hpp"

namespace tslab {

namespace {

ModelParams backbone_copy(const ModelParams& params, const ModelConfig& config) {
  ModelParams out;
  for (const auto& name : backbone_names(config)) {
    Tensor c = params.at(name).clone();
    c.set_requires_grad(true);
    out.emplace(name, std::move(c));
  }
  return out;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw ConfigError("warmup fraction must lie in [0, 1]");
  if (max_tokens < 0) throw ConfigError("max tokens must be non-negative");
  if (eval_interval < 1) throw ConfigError("eval interval must be positive");
  if (context_length < 1 || horizon < 1) throw ConfigError("context length and horizon must be positive");
  if (val_windows < 1) throw ConfigError("need at least one validation window");
}

double lr_at(double tokens, const TrainConfig& config) {
  const double warm = config.warmup_fraction * static_cast<double>(config.max_tokens);
  if (warm <= 0.0 || tokens >= warm) return config.lr;
  return config.lr * std::max(tokens, 0.0) / warm;
}

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::random: return "random";
    case Regime::language: return "language";
    case Regime::instruction: return "instruction";
  }
  return "unknown";
}

Regime regime_from_string(const std::string& name) {
  if (name == "random") return Regime::random;
  if (name == "language") return Regime::language;
  if (name == "instruction") return Regime::instruction;
  throw ConfigError("unknown regime '" + name + "' (expected random, language or instruction)");
}

WindowSampler::WindowSampler(const std::vector<Series>& series, int context_length, int horizon, std::uint64_t seed)
    : series_(&series),
      context_(static_cast<std::size_t>(context_length)),
      horizon_(static_cast<std::size_t>(horizon)),
      rng_(seed) {
  const std::size_t need = context_ + horizon_;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].values.size() < need) {
      ++skipped_;
      continue;
    }
    usable_.push_back(i);
    total_ += series[i].values.size() - need + 1;
    cumulative_.push_back(total_);
  }
  if (total_ == 0) {
    throw ContractError("no series is long enough for a window of " + std::to_string(context_) + " + " +
                        std::to_string(horizon_) + " values (" + std::to_string(skipped_) + " skipped)");
  }
}

Window WindowSampler::next() {
  const std::size_t k = rng_.below(total_);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), k);
  const std::size_t slot = static_cast<std::size_t>(it - cumulative_.begin());
  const std::size_t offset = k - (slot == 0 ? 0 : cumulative_[slot - 1]);
  const auto& v = (*series_)[usable_[slot]].values;
  Window w;
  w.context.assign(v.begin() + static_cast<std::ptrdiff_t>(offset),
                   v.begin() + static_cast<std::ptrdiff_t>(offset + context_));
  w.target.assign(v.begin() + static_cast<std::ptrdiff_t>(offset + context_),
                  v.begin() + static_cast<std::ptrdiff_t>(offset + context_ + horizon_));
  return w;
}

std::vector<Window> enumerate_windows(const Series& series, int context_length, int horizon) {
  const auto t = static_cast<std::size_t>(context_length);
  const auto u = static_cast<std::size_t>(horizon);
  std::vector<Window> out;
  const auto& v = series.values;
  for (std::size_t off = 0; off + t + u <= v.size(); ++off) {
    out.push_back({std::vector<float>(v.begin() + static_cast<std::ptrdiff_t>(off),
                                      v.begin() + static_cast<std::ptrdiff_t>(off + t)),
                   std::vector<float>(v.begin() + static_cast<std::ptrdiff_t>(off + t),
                                      v.begin() + static_cast<std::ptrdiff_t>(off + t + u))});
  }
  return out;
}

std::vector<Window> sample_windows(const std::vector<Series>& series, int context_length, int horizon,
                                   std::size_t count, std::uint64_t seed) {
  WindowSampler sampler(series, context_length, horizon, seed);
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.next());
  return out;
}

std::string window_fingerprint(const std::vector<Window>& windows) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  mix(windows.size());
  for (const auto& w : windows) {
    mix(w.context.size());
    mix(w.target.size());
    for (float f : w.context) mix(std::bit_cast<std::uint32_t>(f));
    for (float f : w.target) mix(std::bit_cast<std::uint32_t>(f));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentData make_experiment_data(const std::vector<Series>& all, double val_fraction, int context_length,
                                    int horizon, std::size_t val_windows, std::uint64_t data_seed) {
  ExperimentData d;
  auto [train, val] = split_series(all, val_fraction, Rng::derive(data_seed, 1));
  d.train = std::move(train);
  d.validation = std::move(val);
  d.val_windows = sample_windows(d.validation, context_length, horizon, val_windows, Rng::derive(data_seed, 2));
  d.fingerprint = window_fingerprint(d.val_windows);
  return d;
}

TsModel build_ts_model(const ModelConfig& config, const TokenizerConfig& tokenizer, const ModelParams* pretrained,
                       std::uint64_t seed) {
  config.validate();
  tokenizer.validate();
  TsModel m;
  m.config = config;
  m.tokenizer = tokenizer;
  const auto bins = static_cast<std::size_t>(tokenizer.bins.bins);
  const auto d = static_cast<std::size_t>(config.d_model);
  const TokenKind kind = tokenizer.token_kind();
  const std::size_t width = kind == TokenKind::discrete ? bins : tokenizer.d_token();
  if (pretrained) {
    validate_params(*pretrained, config);
    m.backbone = backbone_copy(*pretrained, config);
    m.adapter = init_adapter_from_pretrained(kind, pretrained->at(kSharedEmbedding), bins, width, 0,
                                             Rng::derive(seed, 11));
  } else {
    m.backbone = backbone_copy(init_random(config, Rng::derive(seed, 10)), config);
    m.adapter = init_adapter_random({kind, d, width}, Rng::derive(seed, 11));
  }
  m.head = init_head_random(bins, d, Rng::derive(seed, 12));
  return m;
}

RunResult finetune_run(const RunSpec& spec, const ExperimentData& data) {
  spec.train.validate();
  spec.tokenizer.validate();
  if (spec.regime != Regime::random && !spec.pretrained) {
    throw ConfigError("regime '" + to_string(spec.regime) + "' needs pretrained weights");
  }
  const TrainConfig& tc = spec.train;
  const std::size_t t_prime = spec.tokenizer.output_length(static_cast<std::size_t>(tc.context_length));
  if (t_prime == 0) {
    throw ConfigError("context length " + std::to_string(tc.context_length) + " leaves no tokens for the " +
                      to_string(spec.tokenizer.kind) + " tokenizer");
  }
  RunResult result;
  result.model = build_ts_model(spec.model, spec.tokenizer,
                                spec.regime == Regime::random ? nullptr : spec.pretrained, tc.seed);
  result.tokens_per_step = static_cast<std::int64_t>(tc.batch_size) * static_cast<std::int64_t>(t_prime);
  result.curve.run_id = spec.run_id;
  result.curve.seed = static_cast<std::int64_t>(tc.seed);

  std::vector<PreparedWindow> val;
  val.reserve(data.val_windows.size());
  for (const auto& w : data.val_windows) val.push_back(prepare_window(w, spec.tokenizer));

  std::optional<std::filesystem::path> csv;
  if (spec.out_dir) {
    std::filesystem::create_directories(*spec.out_dir);
    csv = curve_path(*spec.out_dir, spec.run_id);
    std::filesystem::remove(*csv);
    std::filesystem::remove(meta_path(*spec.out_dir, spec.run_id));
  }
  auto record = [&](std::int64_t tokens) {
    const double loss = evaluate_loss(result.model, val);
    const LossPoint p{static_cast<double>(tokens), loss};
    if (!std::isfinite(loss)) {
      throw DivergenceError(spec.run_id + ": non-finite validation loss at " + std::to_string(tokens) + " tokens");
    }
    result.curve.points.push_back(p);
    if (csv) append_curve_row(*csv, spec.run_id, result.curve.seed, p);
  };

  record(0);
  const std::int64_t steps =
      tc.max_tokens == 0 ? 0 : (tc.max_tokens + result.tokens_per_step - 1) / result.tokens_per_step;
  WindowSampler sampler(data.train, tc.context_length, tc.horizon, Rng::derive(tc.seed, 20));
  AdamW opt(result.model.parameters(), {0.9, 0.999, 1e-8, tc.weight_decay, 0.0});
  std::int64_t next_eval = tc.eval_interval;
  for (std::int64_t k = 1; k <= steps; ++k) {
    std::vector<PreparedWindow> batch;
    batch.reserve(static_cast<std::size_t>(tc.batch_size));
    for (int b = 0; b < tc.batch_size; ++b) batch.push_back(prepare_window(sampler.next(), spec.tokenizer));
    opt.zero_grad();
    const Tensor loss = ts_loss(result.model, batch);
    if (!std::isfinite(loss.item())) {
      throw DivergenceError(spec.run_id + ": non-finite training loss at step " + std::to_string(k) +
                            "; curve kept up to " + std::to_string((k - 1) * result.tokens_per_step) + " tokens");
    }
    loss.backward();
    const std::int64_t tokens = k * result.tokens_per_step;
    opt.step(lr_at(static_cast<double>(tokens), tc));
    if (tokens >= next_eval || k == steps) {
      record(tokens);
      while (next_eval <= tokens) next_eval += tc.eval_interval;
    }
  }
  result.steps = steps;

  if (spec.out_dir) {
    save_checkpoint(result.model.named(), *spec.out_dir / (spec.run_id + ".ckpt"));
    nlohmann::ordered_json meta;
    meta["run_id"] = spec.run_id;
    meta["seed"] = tc.seed;
    meta["tier"] = spec.model.tier_name;
    meta["tokenizer"] = to_string(spec.tokenizer.kind);
    meta["regime"] = to_string(spec.regime);
    meta["val_fingerprint"] = data.fingerprint;
    meta["val_windows"] = data.val_windows.size();
    meta["context_length"] = tc.context_length;
    meta["horizon"] = tc.horizon;
    meta["tokens_per_step"] = result.tokens_per_step;
    meta["steps"] = steps;
    meta["max_tokens"] = tc.max_tokens;
    meta["lr"] = tc.lr;
    meta["batch_size"] = tc.batch_size;
    meta["weight_decay"] = tc.weight_decay;
    meta["warmup_fraction"] = tc.warmup_fraction;
    std::ofstream(meta_path(*spec.out_dir, spec.run_id)) << meta.dump(2) << '\n';
  }
  return result;
}

std::string make_run_id(const std::string& tier, TokenizerKind tokenizer, Regime regime, std::uint64_t seed) {
  return tier + "_" + to_string(tokenizer) + "_" + to_string(regime) + "_s" + std::to_string(seed);
}

RunIdParts parse_run_id(const std::string& run_id) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= run_id.size(); ++i) {
    if (i == run_id.size() || run_id[i] == '_') {
      parts.push_back(run_id.substr(start, i - start));
      start = i + 1;
    }
  }
  auto bad = [&](const std::string& why) {
    return ParseError("run id '" + run_id + "' is not <tier>_<tokenizer>_<regime>_s<seed>: " + why);
  };
  if (parts.size() < 4) throw bad("too few fields");
  RunIdParts out;
  out.tier = parts[0];
  try {
    out.tokenizer = tokenizer_kind_from_string(parts[1]);
    out.regime = regime_from_string(parts[2]);
  } catch (const ConfigError& e) {
    throw bad(e.what());
  }
  const std::string& s = parts[3];
  if (s.size() < 2 || s[0] != 's' || s.find_first_not_of("0123456789", 1) != std::string::npos) {
    throw bad("bad seed field '" + s + "'");
  }
  out.seed = std::stoull(s.substr(1));
  for (std::size_t i = 4; i < parts.size(); ++i) out.suffix += "_" + parts[i];
  return out;
}

std::optional<std::string> read_meta_fingerprint(const std::filesystem::path& curve_file) {
  std::string name = curve_file.filename().string();
  const std::string ext = ".losscurve.csv";
  if (name.size() <= ext.size() || name.compare(name.size() - ext.size(), ext.size(), ext) != 0) return std::nullopt;
  const auto meta = curve_file.parent_path() / (name.substr(0, name.size() - ext.size()) + ".meta.json");
  std::ifstream in(meta);
  if (!in) return std::nullopt;
  try {
    const auto j = nlohmann::json::parse(in);
    if (!j.contains("val_fingerprint")) return std::nullopt;
    return j.at("val_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta.string() + ": " + e.what());
  }
}

std::vector<SweepPoint> enumerate_sweep(const SweepGrid& grid, const TrainConfig& base, const std::string& base_id) {
  if (grid.size() == 0) throw ConfigError("sweep grid is empty");
  std::vector<SweepPoint> out;
  for (double lr : grid.lr)
    for (int bs : grid.batch_size)
      for (double wd : grid.weight_decay)
        for (double wu : grid.warmup_fraction) {
          SweepPoint p;
          p.train = base;
          p.train.lr = lr;
          p.train.batch_size = bs;
          p.train.weight_decay = wd;
          p.train.warmup_fraction = wu;
          p.run_id = base_id + "_lr" + short_number(lr) + "_bs" + std::to_string(bs) + "_wd" + short_number(wd) +
                     "_wu" + short_number(wu);
          out.push_back(std::move(p));
        }
  return out;
}

SweepOutcome run_sweep(const SweepGrid& grid, const RunSpec& base, const ExperimentData& data) {
  if (!base.out_dir) throw ConfigError("a sweep needs an output directory");
  SweepOutcome outcome;
  for (const auto& point : enumerate_sweep(grid, base.train, base.run_id)) {
    if (std::filesystem::exists(meta_path(*base.out_dir, point.run_id)) &&
        std::filesystem::exists(curve_path(*base.out_dir, point.run_id))) {
      outcome.skipped.push_back(point.run_id);
      outcome.curves.push_back(read_curve_csv(curve_path(*base.out_dir, point.run_id)));
      continue;
    }
    RunSpec spec = base;
    spec.run_id = point.run_id;
    spec.train = point.train;
    try {
      outcome.curves.push_back(finetune_run(spec, data).curve);
    } catch (const Error& e) {
      outcome.failed.push_back(point.run_id + ": " + e.what());
    }
  }
  if (!outcome.curves.empty()) {
    outcome.aggregate = aggregate_seeds(outcome.curves);
    write_aggregate_csv(outcome.aggregate, *base.out_dir / (base.run_id + ".sweep_aggregate.csv"));
  }
  return outcome;
}

}  // namespace tslab
