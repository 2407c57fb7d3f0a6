#include "tslab/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tslab/errors.hpp"
#include "tslab/ops.hpp"
#include "tslab/rng.hpp"

namespace tslab {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "pass" : "FAIL") << ": max relative error " << max_rel_error << " at coordinate " << worst_index
     << " over " << coordinates << " coordinates";
  if (kink_crossings) os << " (" << kink_crossings << " skipped at relu kinks)";
  if (nan_index) os << "; NaN gradient at coordinate " << *nan_index;
  return os.str();
}

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double h, double tol,
                           std::size_t max_coordinates, std::uint64_t seed) {
  if (!(h > 0.0)) throw ContractError("grad_check: h must be positive");
  for (auto& t : leaves) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor loss = f();
  if (loss.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  loss.backward();

  std::vector<double> analytic;
  for (auto& t : leaves) {
    if (t.has_grad()) {
      analytic.insert(analytic.end(), t.grad().begin(), t.grad().end());
    } else {
      analytic.insert(analytic.end(), t.numel(), 0.0);
    }
  }

  std::vector<std::uint8_t> selected(analytic.size(), 1);
  if (max_coordinates > 0 && max_coordinates < analytic.size()) {
    std::vector<std::size_t> order(analytic.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);
    std::fill(selected.begin(), selected.end(), 0);
    for (std::size_t i = 0; i < max_coordinates; ++i) selected[order[i]] = 1;
  }

  GradCheckReport report;
  std::size_t flat = 0;
  NoGradGuard no_grad;
  ReluPatternProbe probe;
  f();
  const std::uint64_t base_pattern = probe.take();
  for (auto& t : leaves) {
    auto values = t.data();
    for (std::size_t i = 0; i < values.size(); ++i, ++flat) {
      if (!selected[flat]) continue;
      ++report.coordinates;
      const float original = values[i];
      values[i] = static_cast<float>(original + h);
      const double up = f().item_exact();
      const std::uint64_t up_pattern = probe.take();
      values[i] = static_cast<float>(original - h);
      const double down = f().item_exact();
      const std::uint64_t down_pattern = probe.take();
      values[i] = original;
      if (up_pattern != base_pattern || down_pattern != base_pattern) {
        ++report.kink_crossings;
        continue;
      }
      // The actual perturbation after float rounding.
      const double step = (static_cast<double>(static_cast<float>(original + h)) -
                           static_cast<double>(static_cast<float>(original - h)));
      const double numeric = (up - down) / step;
      const double a = analytic[flat];
      if (std::isnan(a) || std::isnan(numeric)) {
        if (!report.nan_index) report.nan_index = flat;
        continue;
      }
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_index = flat;
      }
    }
  }
  report.passed = !report.nan_index && report.max_rel_error <= tol;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h, double tol) {
  Tensor leaf = x.detach();
  return grad_check([&] { return f(leaf); }, {leaf}, h, tol);
}

}  // namespace tslab
