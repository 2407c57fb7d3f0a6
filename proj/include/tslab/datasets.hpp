#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tslab {

struct Series {
  std::string name;
  std::vector<std::string> timestamps;  // empty for generated series
  std::vector<float> values;
};

// Closed interval; lo == hi gives a point value.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// x_t = slope * t + sum_k A_k sin(2 pi t / P_k + phi_k) + e_t with
// e_t = ar * e_{t-1} + noise * eps_t started from its stationary law.
// slope, A_k, P_k are drawn uniformly from their ranges, phi_k from [0, 2 pi).
struct SyntheticSpec {
  int n_series = 64;
  int length = 1024;
  Range trend_slope{-0.005, 0.005};
  int n_sinusoids = 2;
  Range period{8.0, 96.0};
  Range amplitude{0.5, 2.0};
  double ar_coefficient = 0.6;
  double noise_scale = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<Series> generate_series(const SyntheticSpec& spec);

struct CsvLoadResult {
  std::vector<Series> series;
  std::vector<std::string> warnings;
};

// One series per file with header `timestamp,value`. Values parse as double
// and are stored as float. Throws ParseError naming file and line.
CsvLoadResult load_csv(const std::vector<std::filesystem::path>& paths);

// Timestamps default to the row index when the series has none. Values are
// written in shortest round-trip form.
void write_csv(const Series& series, const std::filesystem::path& path);

// Series-level train/validation split: a seeded shuffle, the first
// round(n * fraction) series (at least one, at most n - 1) go to validation.
std::pair<std::vector<Series>, std::vector<Series>> split_series(const std::vector<Series>& all, double val_fraction,
                                                                 std::uint64_t seed);

// Deterministic pseudo-English text from a seeded grammar, exactly `bytes`
// bytes long, printable ASCII plus newlines.
std::string generate_corpus(std::size_t bytes, std::uint64_t seed);

}  // namespace tslab
