#pragma once

#include <functional>
#include <vector>

#include "pnnet/tensor.hpp"

namespace pnnet {

/// Scalar value of a differentiable map plus its analytic gradient.
struct ValueAndGrad {
  double value = 0;
  TensorD grad;
};

using DifferentiableFn = std::function<ValueAndGrad(const TensorD&)>;

struct GradCheckOptions {
  double step = 1e-3;
  /// Denominator floor of the relative error, so coordinates whose true
  /// derivative is (near) zero are judged by absolute error instead. The
  /// effective floor is max(floor, relative_floor * max|analytic gradient|).
  double floor = 1e-6;
  double relative_floor = 1e-2;
  /// Coordinates to probe; empty means every coordinate.
  std::vector<std::size_t> coordinates;
  /// Optional value-only evaluation used for the perturbed probes.
  std::function<double(const TensorD&)> value_fn;
  /// Optional test that a probe lies on the same smooth piece as the base
  /// point (no max-pool argmax or min-selection change). It runs right after
  /// the probe's value was computed. Coordinates whose probes fail are skipped.
  std::function<bool(const TensorD&)> same_piece;
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Central-difference check of `fn`'s analytic gradient at `at`.
/// Throws NumericError on any non-finite value.
GradCheckReport grad_check(const DifferentiableFn& fn, const TensorD& at, const GradCheckOptions& options = {});

/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double relative_error(double analytic, double numeric, double floor);

}  // namespace pnnet
