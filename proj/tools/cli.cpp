#include "cli.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string_view>

#include <CLI11.hpp>

#include "plot.hpp"
#include "tslab/checkpoint.hpp"
#include "tslab/errors.hpp"
#include "tslab/loss_curve.hpp"
#include "tslab/transfer_analysis.hpp"

namespace tslab::cli {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string key_path(const std::string& where, const std::string& key) {
  return where.empty() ? key : where + "." + key;
}

void check_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError("config " + (where.empty() ? "root" : "'" + where + "'") + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw ConfigError("unknown config key '" + key_path(where, it.key()) + "'");
    }
  }
}

template <class T>
bool type_matches(const json& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v.is_boolean();
  } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
    return v.is_number_unsigned();
  } else if constexpr (std::is_integral_v<T>) {
    return v.is_number_integer();
  } else if constexpr (std::is_floating_point_v<T>) {
    return v.is_number();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v.is_string();
  } else {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
      if (!type_matches<typename T::value_type>(e)) return false;
    }
    return true;
  }
}

template <class T>
void read(const json& j, const std::string& where, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!type_matches<T>(*it)) throw ConfigError("config key '" + key_path(where, key) + "' has the wrong type");
  out = it->template get<T>();
}

void read_range(const json& j, const std::string& where, const char* key, Range& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_number()) {
    out = {it->get<double>(), it->get<double>()};
    return;
  }
  std::vector<double> v;
  read(j, where, key, v);
  if (v.size() != 2) throw ConfigError("config key '" + key_path(where, key) + "' must be a number or [lo, hi]");
  out = {v[0], v[1]};
}

void parse_tokenizer(const json& j, TokenizerConfig& t) {
  check_keys(j, "tokenizer", {"kind", "bins", "half_range", "lags", "eps"});
  std::string kind = to_string(t.kind);
  read(j, "tokenizer", "kind", kind);
  t.kind = tokenizer_kind_from_string(kind);
  read(j, "tokenizer", "bins", t.bins.bins);
  read(j, "tokenizer", "half_range", t.bins.half_range);
  read(j, "tokenizer", "lags", t.lags.lags);
  read(j, "tokenizer", "eps", t.eps);
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j, "train", {"lr", "batch_size", "weight_decay", "warmup_fraction", "max_tokens", "eval_interval",
                          "context_length", "horizon", "val_windows"});
  read(j, "train", "lr", t.lr);
  read(j, "train", "batch_size", t.batch_size);
  read(j, "train", "weight_decay", t.weight_decay);
  read(j, "train", "warmup_fraction", t.warmup_fraction);
  read(j, "train", "max_tokens", t.max_tokens);
  read(j, "train", "eval_interval", t.eval_interval);
  read(j, "train", "context_length", t.context_length);
  read(j, "train", "horizon", t.horizon);
  read(j, "train", "val_windows", t.val_windows);
}

void parse_data(const json& j, DataConfig& d) {
  check_keys(j, "data", {"synthetic", "csv", "val_fraction", "seed"});
  read(j, "data", "csv", d.csv);
  read(j, "data", "val_fraction", d.val_fraction);
  read(j, "data", "seed", d.seed);
  if (const auto it = j.find("synthetic"); it != j.end()) {
    const std::string w = "data.synthetic";
    check_keys(*it, w, {"n_series", "length", "trend_slope", "n_sinusoids", "period", "amplitude", "ar_coefficient",
                        "noise_scale", "seed"});
    auto& s = d.synthetic;
    read(*it, w, "n_series", s.n_series);
    read(*it, w, "length", s.length);
    read_range(*it, w, "trend_slope", s.trend_slope);
    read(*it, w, "n_sinusoids", s.n_sinusoids);
    read_range(*it, w, "period", s.period);
    read_range(*it, w, "amplitude", s.amplitude);
    read(*it, w, "ar_coefficient", s.ar_coefficient);
    read(*it, w, "noise_scale", s.noise_scale);
    read(*it, w, "seed", s.seed);
  }
}

void parse_pretrain(const json& j, ExperimentConfig& c) {
  const std::string w = "pretrain";
  check_keys(j, w, {"steps", "batch_size", "seq_len", "lr", "warmup_steps", "weight_decay", "clip_norm", "log_every",
                    "corruption_rate", "mean_span", "corpus", "corpus_bytes", "corpus_seed", "instruction_pairs"});
  auto& p = c.pretrain;
  read(j, w, "steps", p.steps);
  read(j, w, "batch_size", p.batch_size);
  read(j, w, "seq_len", p.seq_len);
  read(j, w, "lr", p.lr);
  read(j, w, "warmup_steps", p.warmup_steps);
  read(j, w, "weight_decay", p.weight_decay);
  read(j, w, "clip_norm", p.clip_norm);
  read(j, w, "log_every", p.log_every);
  read(j, w, "corruption_rate", p.corruption.rate);
  read(j, w, "mean_span", p.corruption.mean_span);
  std::string corpus;
  read(j, w, "corpus", corpus);
  if (!corpus.empty()) c.corpus.path = corpus;
  read(j, w, "corpus_bytes", c.corpus.bytes);
  read(j, w, "corpus_seed", c.corpus.seed);
  read(j, w, "instruction_pairs", c.instruction_pairs);
}

void parse_sweep(const json& j, SweepGrid& g) {
  check_keys(j, "sweep", {"lr", "batch_size", "weight_decay", "warmup_fraction"});
  read(j, "sweep", "lr", g.lr);
  read(j, "sweep", "batch_size", g.batch_size);
  read(j, "sweep", "weight_decay", g.weight_decay);
  read(j, "sweep", "warmup_fraction", g.warmup_fraction);
}

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Values filled from the command line; unset means "keep the config value".
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool dry_run = false;
  bool no_timestamp = false;
  std::optional<std::string> tier;
  std::optional<std::string> tokenizer;
  std::optional<std::string> regime;
  std::optional<std::string> checkpoint;
  std::optional<std::int64_t> max_tokens;
  std::optional<std::int64_t> steps;
  std::optional<std::string> corpus;
  std::optional<std::size_t> bytes;
  std::vector<std::string> data;
  std::vector<std::string> random;
  std::vector<std::string> pretrained;
  std::vector<double> levels;
  std::size_t grid_size = 64;
  std::string kind = "curves";
  std::vector<std::string> inputs;
  std::optional<std::string> output;
};

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.tier) c.tier = *o.tier;
  if (o.tokenizer) c.tokenizer.kind = tokenizer_kind_from_string(*o.tokenizer);
  if (o.regime) c.regime = regime_from_string(*o.regime);
  if (o.checkpoint) c.checkpoint = *o.checkpoint;
  if (o.max_tokens) c.train.max_tokens = *o.max_tokens;
  if (o.steps) c.pretrain.steps = *o.steps;
  if (o.corpus) c.corpus.path = *o.corpus;
  if (o.bytes) c.corpus.bytes = *o.bytes;
  if (!o.data.empty()) c.data.csv = o.data;
  c.train.seed = c.seed;
  c.pretrain.seed = c.seed;
  c.validate();
  return c;
}

ExperimentData load_data(const ExperimentConfig& c, std::ostream& err) {
  std::vector<Series> all;
  if (c.data.csv.empty()) {
    all = generate_series(c.data.synthetic);
  } else {
    const auto files = expand_globs(c.data.csv);
    if (files.empty()) throw ConfigError("data.csv matched no files");
    auto loaded = load_csv(files);
    for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';
    all = std::move(loaded.series);
  }
  return make_experiment_data(all, c.data.val_fraction, c.train.context_length, c.train.horizon,
                              static_cast<std::size_t>(c.train.val_windows), c.data.seed);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

// Loads pretrained weights for the regime, or warns that a checkpoint is unused.
std::optional<ModelParams> load_backbone(const ExperimentConfig& c, std::ostream& err) {
  if (c.regime == Regime::random) {
    if (c.checkpoint) err << "warning: regime random ignores checkpoint " << *c.checkpoint << '\n';
    return std::nullopt;
  }
  auto params = load_checkpoint(*c.checkpoint);
  validate_params(params, ModelConfig::tier(c.tier));
  return params;
}

int cmd_gen_data(const ExperimentConfig& c, std::ostream& out) {
  fs::create_directories(c.out);
  const auto series = generate_series(c.data.synthetic);
  for (const auto& s : series) write_csv(s, fs::path(c.out) / (s.name + ".csv"));
  out << "wrote " << series.size() << " series to " << c.out << '\n';
  return kExitOk;
}

std::string corpus_text(const ExperimentConfig& c) {
  if (!c.corpus.path) return generate_corpus(c.corpus.bytes, c.corpus.seed);
  std::ifstream f(*c.corpus.path, std::ios::binary);
  if (!f) throw ConfigError("cannot open corpus " + *c.corpus.path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cmd_gen_corpus(const ExperimentConfig& c, std::ostream& out) {
  fs::create_directories(c.out);
  const auto path = fs::path(c.out) / "corpus.txt";
  write_text(path, generate_corpus(c.corpus.bytes, c.corpus.seed));
  out << "wrote " << c.corpus.bytes << " bytes to " << path.string() << '\n';
  return kExitOk;
}

int finish_pretrain(const std::string& run_id, const PretrainResult& result, const fs::path& dir, std::ostream& out) {
  save_checkpoint(result.params, dir / (run_id + ".ckpt"));
  out << run_id << ": loss " << format_number(result.log.points.front().loss) << " -> "
      << format_number(result.log.points.back().loss) << ", checkpoint " << (dir / (run_id + ".ckpt")).string() << '\n';
  return kExitOk;
}

int cmd_pretrain(const ExperimentConfig& c, std::ostream& out) {
  const auto model = ModelConfig::tier(c.tier);
  const std::string corpus = corpus_text(c);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  const std::string id = "language_" + c.tier + "_s" + std::to_string(c.seed);
  const auto csv = curve_path(dir, id);
  fs::remove(csv);
  const auto result = pretrain_language(model, corpus, c.pretrain, [&](const LossPoint& p) {
    append_curve_row(csv, id, static_cast<std::int64_t>(c.seed), p);
  });
  return finish_pretrain(id, result, dir, out);
}

int cmd_tune_instruct(const ExperimentConfig& c, std::ostream& out) {
  if (!c.checkpoint) throw ConfigError("tune-instruct needs a language checkpoint (--checkpoint)");
  if (!fs::exists(*c.checkpoint)) throw ConfigError("checkpoint not found: " + *c.checkpoint);
  const auto model = ModelConfig::tier(c.tier);
  const auto weights = load_checkpoint(*c.checkpoint);
  validate_params(weights, model);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  const std::string id = "instruction_" + c.tier + "_s" + std::to_string(c.seed);
  const auto csv = curve_path(dir, id);
  fs::remove(csv);
  const auto pairs = generate_instruction_pairs(c.instruction_pairs, c.seed);
  const auto result = tune_instruction_analog(weights, model, pairs, c.pretrain, [&](const LossPoint& p) {
    append_curve_row(csv, id, static_cast<std::int64_t>(c.seed), p);
  });
  return finish_pretrain(id, result, dir, out);
}

RunSpec base_spec(const ExperimentConfig& c, const ModelParams* pretrained) {
  RunSpec spec;
  spec.model = ModelConfig::tier(c.tier);
  spec.tokenizer = c.tokenizer;
  spec.train = c.train;
  spec.regime = c.regime;
  spec.pretrained = pretrained;
  spec.run_id = make_run_id(c.tier, c.tokenizer.kind, c.regime, c.seed);
  spec.out_dir = fs::path(c.out);
  return spec;
}

int cmd_finetune(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const auto pretrained = load_backbone(c, err);
  const auto data = load_data(c, err);
  const auto spec = base_spec(c, pretrained ? &*pretrained : nullptr);
  fs::create_directories(*spec.out_dir);
  write_text(*spec.out_dir / (spec.run_id + ".config.json"), to_json(c).dump(2) + "\n");
  const auto result = finetune_run(spec, data);
  out << spec.run_id << ": " << result.steps << " steps, val loss " << format_number(result.curve.points.front().loss)
      << " -> " << format_number(result.curve.points.back().loss) << '\n';
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  enumerate_sweep(c.sweep, c.train, "");
  const auto pretrained = load_backbone(c, err);
  const auto data = load_data(c, err);
  const auto spec = base_spec(c, pretrained ? &*pretrained : nullptr);
  fs::create_directories(*spec.out_dir);
  const auto outcome = run_sweep(c.sweep, spec, data);
  out << "sweep " << spec.run_id << ": " << c.sweep.size() << " configs, " << outcome.curves.size() - outcome.skipped.size()
      << " run, " << outcome.skipped.size() << " skipped, " << outcome.failed.size() << " failed\n";
  for (const auto& f : outcome.failed) err << "failed: " << f << '\n';
  return outcome.failed.empty() ? kExitOk : kExitRuntime;
}

std::vector<std::pair<fs::path, LossCurve>> read_curves(const std::vector<std::string>& patterns, const char* what) {
  const auto files = expand_globs(patterns);
  if (files.empty()) throw ConfigError(std::string("no ") + what + " curve files given or matched");
  std::vector<std::pair<fs::path, LossCurve>> out;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ConfigError(std::string(what) + " curve file not found: " + f.string());
    out.emplace_back(f, read_curve_csv(f));
  }
  return out;
}

LossCurve group_curve(const std::vector<std::pair<fs::path, LossCurve>>& group, const std::string& name,
                      const fs::path& dir) {
  if (group.size() == 1) return group.front().second;
  std::vector<LossCurve> curves;
  for (const auto& g : group) curves.push_back(g.second);
  const auto agg = aggregate_seeds(curves);
  write_aggregate_csv(agg, dir / (name + "_aggregate.csv"));
  return agg.mean_curve(name + "_mean");
}

int cmd_analyze(const ExperimentConfig& c, const Overrides& o, std::ostream& out, std::ostream& err) {
  const auto random = read_curves(o.random, "random");
  const auto pretrained = read_curves(o.pretrained, "pretrained");
  std::map<std::string, std::vector<std::string>> by_fingerprint;
  std::size_t missing = 0;
  for (const auto* group : {&random, &pretrained}) {
    for (const auto& [path, curve] : *group) {
      if (const auto fp = read_meta_fingerprint(path)) {
        by_fingerprint[*fp].push_back(path.filename().string());
      } else {
        ++missing;
      }
    }
  }
  if (by_fingerprint.size() > 1) {
    std::ostringstream msg;
    msg << "curves were scored on different validation sets:";
    for (const auto& [fp, files] : by_fingerprint) {
      msg << "\n  " << fp << ":";
      for (const auto& f : files) msg << ' ' << f;
    }
    throw ContractError(msg.str());
  }
  if (missing) err << "warning: " << missing << " curve(s) have no metadata; validation sets not checked\n";

  const fs::path dir = c.out;
  fs::create_directories(dir);
  const auto r = group_curve(random, "random", dir);
  const auto p = group_curve(pretrained, "pretrained", dir);
  const auto levels = o.levels.empty() ? default_loss_grid(r, p, o.grid_size) : o.levels;
  const auto report = effective_transfer(r, p, levels);
  write_transfer_report(report, dir / "transfer_report.csv");
  if (!report.diagnostic.empty()) err << "note: " << report.diagnostic << '\n';
  const auto diff = loss_difference(r, p);
  write_difference_csv(diff, dir / "loss_difference.csv");
  if (!diff.diagnostic.empty()) err << "note: " << diff.diagnostic << '\n';
  std::size_t pairs = 0;
  for (const auto& [pp, pc] : pretrained) {
    for (const auto& [rp, rc] : random) {
      if (rc.seed != pc.seed || random.size() == 1 || pretrained.size() == 1) continue;
      write_difference_csv(loss_difference(rc, pc), dir / ("loss_difference_s" + std::to_string(pc.seed) + ".csv"));
      ++pairs;
    }
  }
  std::size_t defined = 0, asymptotes = 0;
  for (const auto& row : report.rows) {
    defined += row.effective_transfer.has_value();
    asymptotes += row.asymptote;
  }
  out << "transfer report: " << report.rows.size() << " levels, " << defined << " defined, " << asymptotes
      << " asymptote; " << pairs << " per-seed difference files\n";
  return kExitOk;
}

std::vector<std::vector<std::string>> read_table(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw ParseError(path.string() + ":1: expected header '" + header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(path.string() + ": bad number '" + s + "'");
}

int cmd_plot(const ExperimentConfig& c, const Overrides& o, std::ostream& out) {
  const auto files = expand_globs(o.inputs);
  if (files.empty()) throw ConfigError("plot needs at least one input file");
  PlotSpec spec;
  if (!o.no_timestamp) spec.timestamp = utc_timestamp();
  if (o.kind == "curves") {
    spec.title = "Validation loss";
    spec.x_label = "tokens seen";
    spec.y_label = "validation loss";
    spec.log_x = true;
    for (const auto& f : files) {
      const auto curve = read_curve_csv(f);
      PlotSeries s{curve.run_id, {}};
      for (const auto& p : curve.points) s.points.emplace_back(p.tokens_seen, p.loss);
      spec.series.push_back(std::move(s));
    }
  } else if (o.kind == "difference") {
    spec.title = "Loss difference (random - pretrained)";
    spec.x_label = "tokens seen";
    spec.y_label = "loss difference";
    spec.log_x = true;
    for (const auto& f : files) {
      PlotSeries s{f.stem().string(), {}};
      for (const auto& row : read_table(f, "tokens_seen,loss_difference")) {
        if (row.size() != 2) throw ParseError(f.string() + ": expected 2 columns");
        s.points.emplace_back(to_double(row[0], f), to_double(row[1], f));
      }
      spec.series.push_back(std::move(s));
    }
  } else if (o.kind == "transfer") {
    spec.title = "Effective data transferred";
    spec.x_label = "validation loss level";
    spec.y_label = "effective tokens transferred";
    for (const auto& f : files) {
      PlotSeries s{f.stem().string(), {}};
      std::optional<double> wall;
      for (const auto& row : read_table(f, kTransferHeader)) {
        if (row.size() != 5) throw ParseError(f.string() + ": expected 5 columns");
        const double level = to_double(row[0], f);
        if (row[4] == "1") wall = std::max(wall.value_or(level), level);
        if (!row[3].empty()) s.points.emplace_back(level, to_double(row[3], f));
      }
      std::sort(s.points.begin(), s.points.end());
      if (wall) spec.asymptotes.push_back(*wall);
      spec.series.push_back(std::move(s));
    }
  } else {
    throw ConfigError("unknown plot kind '" + o.kind + "' (expected curves, difference or transfer)");
  }
  const fs::path target = o.output ? fs::path(*o.output) : fs::path(c.out) / (o.kind + ".svg");
  const std::string svg = render_svg(spec);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_text(target, svg);
  out << "wrote " << target.string() << '\n';
  return kExitOk;
}

void add_experiment_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--tier", o.tier, "Model tier: tiny, small or base");
  sub->add_option("--tokenizer", o.tokenizer, "Tokenizer: naive, lag or bin");
  sub->add_option("--regime", o.regime, "Initialization: random, language or instruction");
  sub->add_option("--checkpoint", o.checkpoint, "Pretrained weights for language / instruction regimes");
  sub->add_option("--max-tokens", o.max_tokens, "Fine-tuning token budget");
  sub->add_option("--data", o.data, "Dataset CSV files or globs (replaces the synthetic generator)");
}

}  // namespace

void ExperimentConfig::validate() const {
  ModelConfig::tier(tier);
  tokenizer.validate();
  train.validate();
  pretrain.validate();
  if (data.csv.empty()) data.synthetic.validate();
  if (!(data.val_fraction > 0.0 && data.val_fraction < 1.0)) throw ConfigError("data.val_fraction must be in (0, 1)");
  if (regime != Regime::random && !checkpoint) {
    throw ConfigError("regime " + to_string(regime) + " needs a checkpoint");
  }
  if (checkpoint && regime != Regime::random && !fs::exists(*checkpoint)) {
    throw ConfigError("checkpoint not found: " + *checkpoint);
  }
  if (instruction_pairs == 0) throw ConfigError("pretrain.instruction_pairs must be positive");
}

ExperimentConfig parse_config(const json& j) {
  check_keys(j, "", {"seed", "out", "tier", "tokenizer", "regime", "checkpoint", "train", "data", "pretrain", "sweep"});
  ExperimentConfig c;
  read(j, "", "seed", c.seed);
  read(j, "", "out", c.out);
  read(j, "", "tier", c.tier);
  std::string regime = to_string(c.regime);
  read(j, "", "regime", regime);
  c.regime = regime_from_string(regime);
  std::string checkpoint;
  read(j, "", "checkpoint", checkpoint);
  if (!checkpoint.empty()) c.checkpoint = checkpoint;
  if (j.contains("tokenizer")) parse_tokenizer(j["tokenizer"], c.tokenizer);
  if (j.contains("train")) parse_train(j["train"], c.train);
  if (j.contains("data")) parse_data(j["data"], c.data);
  if (j.contains("pretrain")) parse_pretrain(j["pretrain"], c);
  if (j.contains("sweep")) parse_sweep(j["sweep"], c.sweep);
  c.train.seed = c.seed;
  c.pretrain.seed = c.seed;
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["tier"] = c.tier;
  j["tokenizer"] = {{"kind", to_string(c.tokenizer.kind)},
                    {"bins", c.tokenizer.bins.bins},
                    {"half_range", c.tokenizer.bins.half_range},
                    {"lags", c.tokenizer.lags.lags},
                    {"eps", c.tokenizer.eps}};
  j["regime"] = to_string(c.regime);
  if (c.checkpoint) j["checkpoint"] = *c.checkpoint;
  j["train"] = {{"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"weight_decay", c.train.weight_decay},
                {"warmup_fraction", c.train.warmup_fraction},
                {"max_tokens", c.train.max_tokens},
                {"eval_interval", c.train.eval_interval},
                {"context_length", c.train.context_length},
                {"horizon", c.train.horizon},
                {"val_windows", c.train.val_windows}};
  const auto& s = c.data.synthetic;
  j["data"] = {{"synthetic",
                {{"n_series", s.n_series},
                 {"length", s.length},
                 {"trend_slope", range_json(s.trend_slope)},
                 {"n_sinusoids", s.n_sinusoids},
                 {"period", range_json(s.period)},
                 {"amplitude", range_json(s.amplitude)},
                 {"ar_coefficient", s.ar_coefficient},
                 {"noise_scale", s.noise_scale},
                 {"seed", s.seed}}},
               {"csv", c.data.csv},
               {"val_fraction", c.data.val_fraction},
               {"seed", c.data.seed}};
  const auto& p = c.pretrain;
  j["pretrain"] = {{"steps", p.steps},
                   {"batch_size", p.batch_size},
                   {"seq_len", p.seq_len},
                   {"lr", p.lr},
                   {"warmup_steps", p.warmup_steps},
                   {"weight_decay", p.weight_decay},
                   {"clip_norm", p.clip_norm},
                   {"log_every", p.log_every},
                   {"corruption_rate", p.corruption.rate},
                   {"mean_span", p.corruption.mean_span},
                   {"corpus", c.corpus.path.value_or("")},
                   {"corpus_bytes", c.corpus.bytes},
                   {"corpus_seed", c.corpus.seed},
                   {"instruction_pairs", c.instruction_pairs}};
  j["sweep"] = {{"lr", c.sweep.lr},
                {"batch_size", c.sweep.batch_size},
                {"weight_decay", c.sweep.weight_decay},
                {"warmup_fraction", c.sweep.warmup_fraction}};
  return j;
}

std::vector<fs::path> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<fs::path> out;
  for (const auto& pattern : patterns) {
    const fs::path p(pattern);
    const std::string name = p.filename().string();
    if (name.find_first_of("*?[") == std::string::npos) {
      out.push_back(p);
      continue;
    }
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    std::vector<fs::path> matches;
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string candidate = entry.path().filename().string();
        if (entry.is_regular_file() && fnmatch(name.c_str(), candidate.c_str(), 0) == 0) {
          matches.push_back(p.has_parent_path() ? entry.path() : fs::path(candidate));
        }
      }
    }
    std::sort(matches.begin(), matches.end());
    out.insert(out.end(), matches.begin(), matches.end());
  }
  return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-series transfer experiments: pretraining, fine-tuning, sweeps and transfer analysis", "tslab"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "Experiment JSON config");
  app.add_option("--seed", o.seed, "Run seed (overrides the config)");
  app.add_option("--out", o.out, "Output directory (overrides the config)");
  app.add_flag("--dry-run", o.dry_run, "Print the resolved config and exit without touching files");
  app.add_flag("--no-timestamp", o.no_timestamp, "Leave the generation timestamp out of SVG output");

  auto* pretrain = app.add_subcommand("pretrain", "Span-corruption pretraining on a text corpus");
  pretrain->add_option("--tier", o.tier, "Model tier: tiny, small or base");
  pretrain->add_option("--steps", o.steps, "Optimizer steps");
  pretrain->add_option("--corpus", o.corpus, "Corpus text file (default: generated)");
  auto* tune = app.add_subcommand("tune-instruct", "Instruction-analog tuning of language weights");
  tune->add_option("--tier", o.tier, "Model tier: tiny, small or base");
  tune->add_option("--checkpoint", o.checkpoint, "Language weights");
  tune->add_option("--steps", o.steps, "Optimizer steps");
  auto* finetune = app.add_subcommand("finetune", "Fine-tune on time series and log the validation curve");
  add_experiment_flags(finetune, o);
  auto* sweep = app.add_subcommand("sweep", "Hyperparameter grid of fine-tuning runs");
  add_experiment_flags(sweep, o);
  auto* analyze = app.add_subcommand("analyze", "Effective data transfer between two groups of loss curves");
  analyze->add_option("--random", o.random, "Curves from random initialization (files or globs)");
  analyze->add_option("--pretrained", o.pretrained, "Curves from pretrained initialization (files or globs)");
  analyze->add_option("--levels", o.levels, "Loss levels to query (default: log-spaced grid)");
  analyze->add_option("--grid-size", o.grid_size, "Number of default grid levels")->check(CLI::PositiveNumber);
  auto* plot = app.add_subcommand("plot", "Render curves, loss differences or transfer reports as SVG");
  plot->add_option("--kind", o.kind, "curves, difference or transfer");
  plot->add_option("inputs", o.inputs, "Input CSV files or globs");
  plot->add_option("-o,--output", o.output, "SVG path (default: <out>/<kind>.svg)");
  auto* gen_data = app.add_subcommand("gen-data", "Write the synthetic series as dataset CSV files");
  auto* gen_corpus = app.add_subcommand("gen-corpus", "Write the generated pretraining corpus");
  gen_corpus->add_option("--bytes", o.bytes, "Corpus size in bytes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    ExperimentConfig c = resolve(o);
    if (o.dry_run) {
      json j{{"command", name}, {"config", to_json(c)}};
      if (name == "analyze") j["inputs"] = {{"random", o.random}, {"pretrained", o.pretrained}};
      if (name == "plot") j["inputs"] = {{"kind", o.kind}, {"files", o.inputs}};
      out << j.dump(2) << '\n';
      return kExitOk;
    }
    if (sub == pretrain) return cmd_pretrain(c, out);
    if (sub == tune) return cmd_tune_instruct(c, out);
    if (sub == finetune) return cmd_finetune(c, out, err);
    if (sub == sweep) return cmd_sweep(c, out, err);
    if (sub == analyze) return cmd_analyze(c, o, out, err);
    if (sub == plot) return cmd_plot(c, o, out);
    if (sub == gen_data) return cmd_gen_data(c, out);
    if (sub == gen_corpus) return cmd_gen_corpus(c, out);
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace tslab::cli
