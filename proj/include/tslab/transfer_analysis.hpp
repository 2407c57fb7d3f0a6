#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tslab/loss_curve.hpp"

namespace tslab {

// Running minimum of the losses; tokens unchanged.
LossCurve monotone_envelope(const LossCurve& curve);

// Loss at `tokens` on the piecewise curve that is linear in (log d, loss),
// or linear in d on a segment starting at d = 0. Empty outside the curve's
// token range.
std::optional<double> interpolate_loss(const LossCurve& curve, double tokens);

// Smallest d whose envelope loss is <= level, interpolating between points as
// interpolate_loss does. Empty when level is below the curve minimum (the
// curve never gets there). Needs at least 2 points.
std::optional<double> inverse_query(const LossCurve& curve, double level);

struct TransferRow {
  double level = 0.0;
  std::optional<double> d_random;
  std::optional<double> d_pretrained;
  std::optional<double> effective_transfer;
  // Random never reaches the level while pretrained does.
  bool asymptote = false;
};

struct TransferReport {
  std::vector<TransferRow> rows;
  std::string random_id;
  std::string pretrained_id;
  // Set when the report is empty for a reason other than an empty grid.
  std::string diagnostic;
};

// `count` levels spaced evenly in log loss from max(min_R, min_P) up to
// min(first_R, first_P), ascending. Empty if that range is empty.
std::vector<double> default_loss_grid(const LossCurve& random, const LossCurve& pretrained, std::size_t count = 64);

// D_T(l) = L_R^-1(l) - L_P^-1(l) per level; both curves go through the
// envelope first. An empty `levels` uses default_loss_grid.
TransferReport effective_transfer(const LossCurve& random, const LossCurve& pretrained,
                                  const std::vector<double>& levels = {});

struct DifferenceSeries {
  std::vector<LossPoint> points;  // (tokens, loss_a - loss_b)
  std::string diagnostic;
};

// b interpolated onto a's tokens within their common range.
DifferenceSeries loss_difference(const LossCurve& a, const LossCurve& b);

struct AggregateCurve {
  std::vector<double> tokens;
  std::vector<double> mean;
  std::vector<double> std;  // population
  std::size_t runs = 0;

  LossCurve mean_curve(const std::string& run_id) const;
};

// All curves interpolated onto the union of their token grids restricted to
// the range every curve covers, then mean and population std per point.
AggregateCurve aggregate_seeds(const std::vector<LossCurve>& curves);

inline constexpr const char* kTransferHeader = "loss_level,d_random,d_pretrained,effective_transfer,asymptote";

// Undefined values are empty fields; asymptote is 0 or 1.
void write_transfer_report(const TransferReport& report, const std::filesystem::path& path);
void write_difference_csv(const DifferenceSeries& series, const std::filesystem::path& path);
void write_aggregate_csv(const AggregateCurve& aggregate, const std::filesystem::path& path);

}  // namespace tslab
