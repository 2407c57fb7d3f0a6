#include "tslab/transfer_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "tslab/errors.hpp"

namespace tslab {

namespace {

// Position of `t` between a and b on the token axis: log scale unless the
// segment starts at zero.
double token_fraction(double a, double b, double t) {
  if (a > 0.0) return std::log(t / a) / std::log(b / a);
  return (t - a) / (b - a);
}

double token_at_fraction(double a, double b, double f) {
  if (a > 0.0) return a * std::pow(b / a, f);
  return a + f * (b - a);
}

void require_points(const LossCurve& c, std::size_t n, const char* what) {
  if (c.points.size() < n) {
    throw ContractError(std::string(what) + ": curve '" + c.run_id + "' needs at least " + std::to_string(n) +
                        " points, has " + std::to_string(c.points.size()));
  }
}

std::string opt_field(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

LossCurve monotone_envelope(const LossCurve& curve) {
  LossCurve out = curve;
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    out.points[i].loss = std::min(out.points[i].loss, out.points[i - 1].loss);
  }
  return out;
}

std::optional<double> interpolate_loss(const LossCurve& curve, double tokens) {
  const auto& p = curve.points;
  if (p.empty() || tokens < p.front().tokens_seen || tokens > p.back().tokens_seen) return std::nullopt;
  auto it = std::upper_bound(p.begin(), p.end(), tokens,
                             [](double t, const LossPoint& q) { return t < q.tokens_seen; });
  const std::size_t j = static_cast<std::size_t>(it - p.begin()) - 1;
  if (p[j].tokens_seen == tokens || j + 1 == p.size()) return p[j].loss;
  const double f = token_fraction(p[j].tokens_seen, p[j + 1].tokens_seen, tokens);
  return p[j].loss + f * (p[j + 1].loss - p[j].loss);
}

std::optional<double> inverse_query(const LossCurve& curve, double level) {
  require_points(curve, 2, "inverse_query");
  const LossCurve env = monotone_envelope(curve);
  const auto& p = env.points;
  if (level < p.back().loss) return std::nullopt;
  std::size_t i = 0;
  while (p[i].loss > level) ++i;
  if (i == 0 || p[i].loss == level) return p[i].tokens_seen;
  const double f = (p[i - 1].loss - level) / (p[i - 1].loss - p[i].loss);
  return token_at_fraction(p[i - 1].tokens_seen, p[i].tokens_seen, f);
}

std::vector<double> default_loss_grid(const LossCurve& random, const LossCurve& pretrained, std::size_t count) {
  require_points(random, 2, "default_loss_grid");
  require_points(pretrained, 2, "default_loss_grid");
  const double min_r = monotone_envelope(random).points.back().loss;
  const double min_p = monotone_envelope(pretrained).points.back().loss;
  const double lo = std::max(min_r, min_p);
  const double hi = std::min(random.points.front().loss, pretrained.points.front().loss);
  if (!(lo <= hi) || count == 0) return {};
  if (lo == hi || count == 1) return {lo};
  std::vector<double> levels(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(count - 1);
    levels[k] = lo > 0.0 ? lo * std::pow(hi / lo, f) : lo + f * (hi - lo);
  }
  levels.front() = lo;
  levels.back() = hi;
  return levels;
}

TransferReport effective_transfer(const LossCurve& random, const LossCurve& pretrained,
                                  const std::vector<double>& levels) {
  TransferReport report;
  report.random_id = random.run_id;
  report.pretrained_id = pretrained.run_id;
  const std::vector<double> grid = levels.empty() ? default_loss_grid(random, pretrained) : levels;
  if (grid.empty()) {
    report.diagnostic = "loss ranges of '" + random.run_id + "' and '" + pretrained.run_id +
                        "' do not overlap; no common loss level to compare";
    return report;
  }
  for (double level : grid) {
    TransferRow row;
    row.level = level;
    row.d_random = inverse_query(random, level);
    row.d_pretrained = inverse_query(pretrained, level);
    if (row.d_random && row.d_pretrained) row.effective_transfer = *row.d_random - *row.d_pretrained;
    row.asymptote = !row.d_random && row.d_pretrained;
    report.rows.push_back(row);
  }
  return report;
}

DifferenceSeries loss_difference(const LossCurve& a, const LossCurve& b) {
  DifferenceSeries out;
  for (const auto& p : a.points) {
    if (const auto lb = interpolate_loss(b, p.tokens_seen)) out.points.push_back({p.tokens_seen, p.loss - *lb});
  }
  if (out.points.empty()) {
    out.diagnostic = "token ranges of '" + a.run_id + "' and '" + b.run_id + "' do not overlap";
  }
  return out;
}

LossCurve AggregateCurve::mean_curve(const std::string& run_id) const {
  LossCurve c;
  c.run_id = run_id;
  for (std::size_t i = 0; i < tokens.size(); ++i) c.points.push_back({tokens[i], mean[i]});
  return c;
}

AggregateCurve aggregate_seeds(const std::vector<LossCurve>& curves) {
  if (curves.empty()) throw ContractError("aggregate_seeds: no curves");
  AggregateCurve agg;
  agg.runs = curves.size();
  double lo = -INFINITY;
  double hi = INFINITY;
  for (const auto& c : curves) {
    require_points(c, 1, "aggregate_seeds");
    lo = std::max(lo, c.points.front().tokens_seen);
    hi = std::min(hi, c.points.back().tokens_seen);
  }
  if (lo > hi) return agg;
  for (const auto& c : curves)
    for (const auto& p : c.points)
      if (p.tokens_seen >= lo && p.tokens_seen <= hi) agg.tokens.push_back(p.tokens_seen);
  std::sort(agg.tokens.begin(), agg.tokens.end());
  agg.tokens.erase(std::unique(agg.tokens.begin(), agg.tokens.end()), agg.tokens.end());
  const double n = static_cast<double>(curves.size());
  for (double t : agg.tokens) {
    std::vector<double> v;
    for (const auto& c : curves) v.push_back(*interpolate_loss(c, t));
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    agg.mean.push_back(m);
    agg.std.push_back(std::sqrt(var / n));
  }
  return agg;
}

void write_transfer_report(const TransferReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kTransferHeader << '\n';
  for (const auto& r : report.rows) {
    out << format_number(r.level) << ',' << opt_field(r.d_random) << ',' << opt_field(r.d_pretrained) << ','
        << opt_field(r.effective_transfer) << ',' << (r.asymptote ? 1 : 0) << '\n';
  }
}

void write_difference_csv(const DifferenceSeries& series, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "tokens_seen,loss_difference\n";
  for (const auto& p : series.points) out << format_number(p.tokens_seen) << ',' << format_number(p.loss) << '\n';
}

void write_aggregate_csv(const AggregateCurve& aggregate, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "tokens_seen,mean,std,runs\n";
  for (std::size_t i = 0; i < aggregate.tokens.size(); ++i) {
    out << format_number(aggregate.tokens[i]) << ',' << format_number(aggregate.mean[i]) << ','
        << format_number(aggregate.std[i]) << ',' << aggregate.runs << '\n';
  }
}

}  // namespace tslab
