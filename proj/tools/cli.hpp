#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tslab/datasets.hpp"
#include "tslab/finetune.hpp"
#include "tslab/pretrain.hpp"

namespace tslab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct DataConfig {
  SyntheticSpec synthetic;
  // Dataset CSV files; when non-empty they replace the synthetic generator.
  std::vector<std::string> csv;
  double val_fraction = 0.2;
  // Fixes the train/validation split and the frozen validation windows.
  std::uint64_t seed = 0;
};

struct CorpusConfig {
  std::optional<std::string> path;
  std::size_t bytes = 1 << 20;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out = "runs";
  std::string tier = "tiny";
  TokenizerConfig tokenizer;
  Regime regime = Regime::random;
  std::optional<std::string> checkpoint;
  TrainConfig train;
  DataConfig data;
  PretrainConfig pretrain;
  CorpusConfig corpus;
  std::size_t instruction_pairs = 4000;
  SweepGrid sweep;

  // Cross-field checks; throws ConfigError.
  void validate() const;
};

// Reads a JSON config over the defaults. Unknown keys and wrong types throw
// ConfigError naming the key path.
ExperimentConfig parse_config(const nlohmann::ordered_json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const ExperimentConfig& config);

// Expands `*` and `?` in the file-name part of each pattern; plain paths
// pass through. Matches are sorted per pattern.
std::vector<std::filesystem::path> expand_globs(const std::vector<std::string>& patterns);

// Entry point shared by the executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tslab::cli
