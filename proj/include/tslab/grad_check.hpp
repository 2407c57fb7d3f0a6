#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tslab/tensor.hpp"

namespace tslab {

struct GradCheckReport {
  double max_rel_error = 0.0;
  // Flat coordinate (across all checked tensors, in order) of the worst error.
  std::size_t worst_index = 0;
  // First coordinate where either gradient was NaN, if any.
  std::optional<std::size_t> nan_index;
  std::size_t coordinates = 0;
  // Coordinates whose +-h stencil flipped a relu input across zero. The loss
  // is not differentiable inside such a stencil, so they are left out of
  // max_rel_error.
  std::size_t kink_crossings = 0;
  bool passed = false;

  std::string summary() const;
};

// Compares the analytic gradient of a scalar-valued `f` at `x` against
// central finite differences (f(x+h) - f(x-h)) / 2h, accumulated in double.
// Error per coordinate is |analytic - numeric| / max(1, |analytic|, |numeric|).
// Coordinates whose stencil crosses a relu kink are counted, not scored.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h, double tol);

// Same check for a closure over several leaf tensors (e.g. model weights).
// The tensors are perturbed in place and restored afterwards. With
// max_coordinates > 0 only a seeded random subset of that many coordinates is
// perturbed; `coordinates` then reports the subset size.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double h, double tol,
                           std::size_t max_coordinates = 0, std::uint64_t seed = 0);

}  // namespace tslab
