#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tslab/datasets.hpp"
#include "tslab/loss_curve.hpp"
#include "tslab/rng.hpp"
#include "tslab/transfer_analysis.hpp"
#include "tslab/ts_model.hpp"

namespace tslab {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 64;
  double weight_decay = 0.0;
  // Share of max_tokens over which the learning rate ramps up from zero.
  double warmup_fraction = 0.0;
  std::int64_t max_tokens = 1'000'000;
  std::int64_t eval_interval = 100'000;
  std::uint64_t seed = 0;
  int context_length = 512;
  int horizon = 64;
  int val_windows = 512;

  void validate() const;
};

// Linear warmup to lr over warmup_fraction * max_tokens, constant afterwards.
double lr_at(double tokens, const TrainConfig& config);

enum class Regime { random, language, instruction };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

// Uniform sampling over every (series, offset) with a full context + target.
// Series shorter than T + U are skipped and counted.
class WindowSampler {
 public:
  WindowSampler(const std::vector<Series>& series, int context_length, int horizon, std::uint64_t seed);

  Window next();
  std::size_t skipped() const { return skipped_; }
  std::size_t window_count() const { return total_; }

 private:
  const std::vector<Series>* series_;
  std::size_t context_;
  std::size_t horizon_;
  std::vector<std::size_t> usable_;
  std::vector<std::size_t> cumulative_;
  std::size_t total_ = 0;
  std::size_t skipped_ = 0;
  Rng rng_;
};

// Every valid window of one series in offset order.
std::vector<Window> enumerate_windows(const Series& series, int context_length, int horizon);

// `count` windows drawn by a WindowSampler seeded with `seed`.
std::vector<Window> sample_windows(const std::vector<Series>& series, int context_length, int horizon,
                                   std::size_t count, std::uint64_t seed);

// Stable 64-bit FNV-1a over window lengths and value bits, as hex.
std::string window_fingerprint(const std::vector<Window>& windows);

// Train/validation series and the frozen validation windows of one
// experiment. Built from a data seed that does not depend on the run seed,
// so every run of an experiment scores the same windows.
struct ExperimentData {
  std::vector<Series> train;
  std::vector<Series> validation;
  std::vector<Window> val_windows;
  std::string fingerprint;
};

ExperimentData make_experiment_data(const std::vector<Series>& all, double val_fraction, int context_length,
                                    int horizon, std::size_t val_windows, std::uint64_t data_seed);

// Backbone from `pretrained` (validated against `config`) or from
// init_random; adapter per the pretrained-initialization rules or random;
// head always random.
TsModel build_ts_model(const ModelConfig& config, const TokenizerConfig& tokenizer, const ModelParams* pretrained,
                       std::uint64_t seed);

struct RunSpec {
  std::string run_id;
  ModelConfig model;
  TokenizerConfig tokenizer;
  TrainConfig train;
  Regime regime = Regime::random;
  // Required for language / instruction regimes.
  const ModelParams* pretrained = nullptr;
  // When set, `<run_id>.losscurve.csv` is appended point by point,
  // `<run_id>.meta.json` and `<run_id>.ckpt` are written at the end.
  std::optional<std::filesystem::path> out_dir;
};

struct RunResult {
  LossCurve curve;
  TsModel model;
  std::int64_t steps = 0;
  std::int64_t tokens_per_step = 0;
};

// Zero-shot point at tokens_seen 0, then every eval_interval tokens and at the
// end. After k steps tokens_seen = k * batch * T'. A non-finite training loss
// throws DivergenceError; rows already written stay on disk.
RunResult finetune_run(const RunSpec& spec, const ExperimentData& data);

// `<tier>_<tokenizer>_<regime>_s<seed>`.
std::string make_run_id(const std::string& tier, TokenizerKind tokenizer, Regime regime, std::uint64_t seed);

struct RunIdParts {
  std::string tier;
  TokenizerKind tokenizer = TokenizerKind::bin;
  Regime regime = Regime::random;
  std::uint64_t seed = 0;
  // Anything after the seed, e.g. sweep hyperparameters.
  std::string suffix;
};

// Throws ParseError when the id does not follow make_run_id.
RunIdParts parse_run_id(const std::string& run_id);

inline std::filesystem::path curve_path(const std::filesystem::path& dir, const std::string& run_id) {
  return dir / (run_id + ".losscurve.csv");
}
inline std::filesystem::path meta_path(const std::filesystem::path& dir, const std::string& run_id) {
  return dir / (run_id + ".meta.json");
}

// Validation fingerprint recorded in a run's meta sidecar, if present.
std::optional<std::string> read_meta_fingerprint(const std::filesystem::path& curve_file);

struct SweepGrid {
  std::vector<double> lr{1e-4, 5e-4, 1e-3};
  std::vector<int> batch_size{64, 128};
  std::vector<double> weight_decay{0.0, 0.01, 0.1};
  std::vector<double> warmup_fraction{0.0, 0.005, 0.01, 0.02};

  std::size_t size() const {
    return lr.size() * batch_size.size() * weight_decay.size() * warmup_fraction.size();
  }
};

struct SweepPoint {
  std::string run_id;
  TrainConfig train;
};

// Cross product in lr, batch, weight decay, warmup order. Run ids get a
// `_lr.._bs.._wd.._wu..` suffix. Throws ConfigError for an empty grid.
std::vector<SweepPoint> enumerate_sweep(const SweepGrid& grid, const TrainConfig& base, const std::string& base_id);

struct SweepOutcome {
  std::vector<LossCurve> curves;
  std::vector<std::string> skipped;
  std::vector<std::string> failed;
  AggregateCurve aggregate;
};

// Runs every grid point not already complete in spec.out_dir (a run counts as
// complete once its meta sidecar exists). Failures are recorded and the sweep
// continues. The aggregate covers every completed or skipped run and is
// written to `<base_id>.sweep_aggregate.csv`.
SweepOutcome run_sweep(const SweepGrid& grid, const RunSpec& base, const ExperimentData& data);

}  // namespace tslab
