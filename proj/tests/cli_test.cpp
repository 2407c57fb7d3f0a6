#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "tslab/checkpoint.hpp"
#include "tslab/errors.hpp"
#include "tslab/finetune.hpp"

namespace tslab::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tslab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tslab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Seconds-scale fine-tuning on the tiny tier.
  std::string quick_config(const std::string& extra = "") const {
    const auto p = path("quick.json");
    write(p, R"({
  "tier": "tiny",
  "tokenizer": {"kind": "bin", "bins": 256},
  "train": {"batch_size": 4, "context_length": 16, "horizon": 4, "max_tokens": 256,
            "eval_interval": 128, "val_windows": 4},
  "data": {"synthetic": {"n_series": 6, "length": 64, "seed": 2}, "val_fraction": 0.34},
  "pretrain": {"steps": 3, "batch_size": 2, "seq_len": 32, "corpus_bytes": 4096, "log_every": 1,
               "warmup_steps": 1, "instruction_pairs": 8}
  )" + extra + "}");
    return p;
  }

  fs::path dir_;
};

TEST_F(CliTest, MissingConfigIsConfigError) {
  const auto r = run_cli({"--config", path("absent.json"), "finetune"});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find(path("absent.json")), std::string::npos);
}

TEST_F(CliTest, UnknownKeysAndWrongTypesRejected) {
  write(path("a.json"), R"({"train": {"lr": 0.001, "learning_rate": 0.1}})");
  auto r = run_cli({"--config", path("a.json"), "--dry-run", "finetune"});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("train.learning_rate"), std::string::npos);
  write(path("b.json"), R"({"train": {"batch_size": "big"}})");
  r = run_cli({"--config", path("b.json"), "--dry-run", "finetune"});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("train.batch_size"), std::string::npos);
  write(path("c.json"), "{not json");
  EXPECT_EQ(run_cli({"--config", path("c.json"), "finetune"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"finetune", "--tokenizer", "patch"}).code, kExitConfig);
  EXPECT_EQ(run_cli({"bogus"}).code, kExitConfig);
}

TEST_F(CliTest, FlagOverridesFileOverridesDefault) {
  write(path("s.json"), R"({"seed": 5, "train": {"lr": 0.01}})");
  auto resolved = [&](std::vector<std::string> args) {
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, kExitOk) << r.err;
    return nlohmann::json::parse(r.out)["config"];
  };
  const auto file = resolved({"--config", path("s.json"), "--dry-run", "finetune"});
  EXPECT_EQ(file["seed"], 5);
  EXPECT_EQ(file["train"]["lr"], 0.01);
  EXPECT_EQ(file["train"]["batch_size"], 64);
  const auto flag = resolved({"--config", path("s.json"), "--seed", "7", "--dry-run", "finetune", "--tier", "small"});
  EXPECT_EQ(flag["seed"], 7);
  EXPECT_EQ(flag["tier"], "small");
  EXPECT_EQ(resolved({"--dry-run", "finetune"})["seed"], 0);
}

TEST_F(CliTest, DryRunTouchesNothing) {
  const auto out = path("never");
  for (const char* cmd : {"pretrain", "finetune", "sweep", "gen-data", "gen-corpus"}) {
    const auto r = run_cli({"--config", quick_config(), "--out", out, "--dry-run", cmd});
    EXPECT_EQ(r.code, kExitOk) << cmd << r.err;
    EXPECT_NE(r.out.find("\"command\": \"" + std::string(cmd) + "\""), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliTest, PretrainWritesLoadableCheckpoint) {
  const auto r = run_cli({"--config", quick_config(), "--out", path("pre"), "--seed", "3", "pretrain"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto ckpt = dir_ / "pre" / "language_tiny_s3.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));
  EXPECT_NO_THROW(validate_params(load_checkpoint(ckpt), ModelConfig::tier("tiny")));
  EXPECT_EQ(read_curve_csv(curve_path(dir_ / "pre", "language_tiny_s3")).points.size(), 4u);

  const auto t = run_cli({"--config", quick_config(), "--out", path("pre"), "--seed", "3", "tune-instruct",
                          "--checkpoint", ckpt.string()});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_TRUE(fs::exists(dir_ / "pre" / "instruction_tiny_s3.ckpt"));
  EXPECT_EQ(run_cli({"--out", path("pre"), "tune-instruct"}).code, kExitConfig);
}

TEST_F(CliTest, LanguageRegimeWithoutCheckpointLeavesNoOutputs) {
  auto r = run_cli({"--config", quick_config(), "--out", path("ft"), "finetune", "--regime", "language"});
  EXPECT_EQ(r.code, kExitConfig);
  r = run_cli({"--config", quick_config(), "--out", path("ft"), "finetune", "--regime", "language", "--checkpoint",
               path("missing.ckpt")});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("missing.ckpt"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("ft")));
}

TEST_F(CliTest, RandomRegimeWarnsAboutCheckpoint) {
  const auto r = run_cli({"--config", quick_config(), "--out", path("ft"), "finetune", "--checkpoint", path("x.ckpt")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("warning: regime random ignores checkpoint"), std::string::npos);
}

TEST_F(CliTest, FinetuneIsByteDeterministicAndNamed) {
  for (const char* sub : {"a", "b"}) {
    const auto r = run_cli({"--config", quick_config(), "--out", path(sub), "--seed", "4", "finetune"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  const std::string id = "tiny_bin_random_s4";
  const auto a = slurp(curve_path(dir_ / "a", id));
  EXPECT_GT(a.size(), 40u);
  EXPECT_EQ(a, slurp(curve_path(dir_ / "b", id)));
  EXPECT_EQ(slurp(dir_ / "a" / (id + ".ckpt")), slurp(dir_ / "b" / (id + ".ckpt")));
  const auto parts = parse_run_id(read_curve_csv(curve_path(dir_ / "a", id)).run_id);
  EXPECT_EQ(parts.tier, "tiny");
  EXPECT_EQ(parts.regime, Regime::random);
  EXPECT_EQ(parts.seed, 4u);
  const auto pre = run_cli({"--config", quick_config(), "--out", path("a"), "pretrain"});
  ASSERT_EQ(pre.code, kExitOk) << pre.err;
  const auto lang = run_cli({"--config", quick_config(), "--out", path("a"), "--seed", "4", "finetune", "--regime",
                             "language", "--checkpoint", path("a/language_tiny_s0.ckpt")});
  ASSERT_EQ(lang.code, kExitOk) << lang.err;
  EXPECT_TRUE(fs::exists(curve_path(dir_ / "a", "tiny_bin_language_s4")));
}

TEST_F(CliTest, SweepRunsGridAndResumes) {
  const auto cfg = quick_config(R"(, "sweep": {"lr": [0.001], "batch_size": [4], "weight_decay": [0.0],
                                              "warmup_fraction": [0.0, 0.1]})");
  auto r = run_cli({"--config", cfg, "--out", path("sw"), "sweep"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("2 configs, 2 run, 0 skipped"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "sw" / "tiny_bin_random_s0.sweep_aggregate.csv"));
  r = run_cli({"--config", cfg, "--out", path("sw"), "sweep"});
  EXPECT_NE(r.out.find("0 run, 2 skipped"), std::string::npos) << r.out;
  const auto empty = quick_config(R"(, "sweep": {"lr": []})");
  EXPECT_EQ(run_cli({"--config", empty, "--out", path("sw2"), "sweep"}).code, kExitConfig);
  const auto full = nlohmann::json::parse(run_cli({"--dry-run", "sweep"}).out)["config"]["sweep"];
  EXPECT_EQ(full["lr"].size() * full["batch_size"].size() * full["weight_decay"].size() *
                full["warmup_fraction"].size(),
            72u);
}

TEST_F(CliTest, AnalyzeWorkedPairAndIdentity) {
  write(path("r.losscurve.csv"), "run_id,seed,tokens_seen,val_loss\nr,0,1,1\nr,0,2,0.8\nr,0,4,0.6\nr,0,8,0.5\n");
  write(path("p.losscurve.csv"), "run_id,seed,tokens_seen,val_loss\np,0,1,0.8\np,0,2,0.6\np,0,4,0.5\np,0,8,0.45\n");
  auto r = run_cli({"--out", path("an"), "analyze", "--random", path("r.losscurve.csv"), "--pretrained",
                    path("p.losscurve.csv"), "--levels", "0.6", "0.5", "0.45"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(slurp(dir_ / "an" / "transfer_report.csv"),
            "loss_level,d_random,d_pretrained,effective_transfer,asymptote\n"
            "0.6,4,2,2,0\n0.5,8,4,4,0\n0.45,,8,,1\n");
  EXPECT_TRUE(fs::exists(dir_ / "an" / "loss_difference.csv"));

  r = run_cli({"--out", path("id"), "analyze", "--random", path("r.losscurve.csv"), "--pretrained",
               path("r.losscurve.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream rows(slurp(dir_ / "id" / "transfer_report.csv"));
  std::string line;
  std::getline(rows, line);
  int n = 0;
  while (std::getline(rows, line)) {
    EXPECT_EQ(line.substr(line.find(',', line.find(',', line.find(',') + 1) + 1)), ",0,0") << line;
    ++n;
  }
  EXPECT_EQ(n, 64);
}

TEST_F(CliTest, AnalyzeRefusesMismatchedValidationSets) {
  write(path("r.losscurve.csv"), "run_id,seed,tokens_seen,val_loss\nr,0,1,1\nr,0,8,0.5\n");
  write(path("p.losscurve.csv"), "run_id,seed,tokens_seen,val_loss\np,0,1,0.8\np,0,8,0.45\n");
  write(path("r.meta.json"), R"({"val_fingerprint": "aaaa"})");
  write(path("p.meta.json"), R"({"val_fingerprint": "bbbb"})");
  const auto r = run_cli({"--out", path("an"), "analyze", "--random", path("r.losscurve.csv"), "--pretrained",
                          path("p.losscurve.csv")});
  EXPECT_NE(r.code, kExitOk);
  EXPECT_NE(r.err.find("different validation sets"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "an" / "transfer_report.csv"));
  EXPECT_EQ(run_cli({"--out", path("an"), "analyze", "--random", path("none*.csv"), "--pretrained",
                     path("p.losscurve.csv")}).code,
            kExitConfig);
}

TEST_F(CliTest, AnalyzeAggregatesSeedsFromGlobs) {
  for (int s = 0; s < 3; ++s) {
    const double shift = 0.01 * s;
    std::ostringstream r, p;
    r << "run_id,seed,tokens_seen,val_loss\n";
    p << "run_id,seed,tokens_seen,val_loss\n";
    for (int k = 0; k < 5; ++k) {
      r << "r," << s << ',' << (1 << k) << ',' << 1.0 - 0.1 * k + shift << '\n';
      p << "p," << s << ',' << (1 << k) << ',' << 0.9 - 0.1 * k + shift << '\n';
    }
    write(path("tiny_bin_random_s" + std::to_string(s) + ".losscurve.csv"), r.str());
    write(path("tiny_bin_language_s" + std::to_string(s) + ".losscurve.csv"), p.str());
  }
  const auto r = run_cli({"--out", path("an"), "analyze", "--random", path("tiny_bin_random_s*.losscurve.csv"),
                          "--pretrained", path("tiny_bin_language_s*.losscurve.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("3 per-seed difference files"), std::string::npos) << r.out;
  const auto agg = slurp(dir_ / "an" / "random_aggregate.csv");
  EXPECT_EQ(agg.substr(0, agg.find('\n')), "tokens_seen,mean,std,runs");
  EXPECT_NE(agg.find("1,1.01,"), std::string::npos) << agg;
  EXPECT_TRUE(fs::exists(dir_ / "an" / "loss_difference_s2.csv"));
}

TEST_F(CliTest, PlotKinds) {
  write(path("r.losscurve.csv"), "run_id,seed,tokens_seen,val_loss\nr,0,0,1.2\nr,0,1,1\nr,0,2,0.8\nr,0,4,0.6\nr,0,8,0.5\n");
  write(path("p.losscurve.csv"), "run_id,seed,tokens_seen,val_loss\np,0,1,0.8\np,0,2,0.6\np,0,4,0.5\np,0,8,0.45\n");
  auto r = run_cli({"--out", path("pl"), "--no-timestamp", "plot", "--kind", "curves", path("*.losscurve.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto svg = slurp(dir_ / "pl" / "curves.svg");
  EXPECT_NE(svg.find("data-x-scale=\"log\""), std::string::npos);
  EXPECT_NE(svg.find("tokens seen (log scale)"), std::string::npos);
  EXPECT_EQ(svg.find("generated"), std::string::npos);
  ASSERT_EQ(run_cli({"--out", path("pl2"), "--no-timestamp", "plot", path("*.losscurve.csv")}).code, kExitOk);
  EXPECT_EQ(svg, slurp(dir_ / "pl2" / "curves.svg"));
  ASSERT_EQ(run_cli({"--out", path("pl3"), "plot", path("*.losscurve.csv")}).code, kExitOk);
  EXPECT_NE(slurp(dir_ / "pl3" / "curves.svg").find("<!-- generated "), std::string::npos);

  ASSERT_EQ(run_cli({"--out", path("an"), "analyze", "--random", path("r.losscurve.csv"), "--pretrained",
                     path("p.losscurve.csv"), "--levels", "0.6", "0.5", "0.45", "0.42"})
                .code,
            kExitOk);
  r = run_cli({"--out", path("pl"), "plot", "--kind", "transfer", path("an/transfer_report.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto transfer = slurp(dir_ / "pl" / "transfer.svg");
  EXPECT_NE(transfer.find("class=\"asymptote\""), std::string::npos);
  EXPECT_NE(transfer.find("stroke-dasharray"), std::string::npos);
  r = run_cli({"--out", path("pl"), "plot", "--kind", "difference", path("an/loss_difference.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;

  EXPECT_NE(run_cli({"--out", path("pl"), "plot"}).code, kExitOk);
  EXPECT_NE(run_cli({"--out", path("pl"), "plot", path("nothing*.csv")}).code, kExitOk);
  EXPECT_EQ(run_cli({"--out", path("pl"), "plot", "--kind", "pie", path("r.losscurve.csv")}).code, kExitConfig);
}

TEST_F(CliTest, GeneratorsWriteLoadableFiles) {
  const auto cfg = quick_config();
  auto r = run_cli({"--config", cfg, "--out", path("data"), "gen-data"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto loaded = load_csv(expand_globs({path("data/*.csv")}));
  EXPECT_EQ(loaded.series.size(), 6u);
  EXPECT_EQ(loaded.series[0].values.size(), 64u);
  r = run_cli({"--out", path("corpus"), "gen-corpus", "--bytes", "1000"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(fs::file_size(dir_ / "corpus" / "corpus.txt"), 1000u);
  r = run_cli({"--config", cfg, "--out", path("ft"), "finetune", "--data", path("data/*.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
}

TEST(ExpandGlobs, PlainPathsPassThrough) {
  EXPECT_EQ(expand_globs({"a/b.csv"}), (std::vector<fs::path>{"a/b.csv"}));
  EXPECT_TRUE(expand_globs({"/definitely/not/here/*.csv"}).empty());
}

}  // namespace
}  // namespace tslab::cli
