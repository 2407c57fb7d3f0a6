#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tslab {

struct LossPoint {
  double tokens_seen = 0.0;
  double loss = 0.0;

  bool operator==(const LossPoint&) const = default;
};

// One run (or an aggregate) of validation loss against training tokens.
struct LossCurve {
  std::string run_id;
  std::int64_t seed = 0;
  std::vector<LossPoint> points;

  // Throws ContractError unless tokens_seen is strictly increasing and every
  // loss is finite.
  void validate() const;
};

inline constexpr const char* kCurveHeader = "run_id,seed,tokens_seen,val_loss";

// Shortest round-trip decimal for a double; used so identical runs give
// byte-identical CSVs.
std::string format_number(double v);

void write_curve_csv(const LossCurve& curve, const std::filesystem::path& path);
// Appends one row; writes the header first when the file is new or empty.
void append_curve_row(const std::filesystem::path& path, const std::string& run_id, std::int64_t seed,
                      const LossPoint& point);
// Throws ParseError naming file and line.
LossCurve read_curve_csv(const std::filesystem::path& path);

}  // namespace tslab
