#include "pnnet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pnnet {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const DifferentiableFn& fn, const TensorD& at, const GradCheckOptions& options) {
  if (!(options.step > 0)) throw ConfigError("grad_check: step must be positive");
  const ValueAndGrad base = fn(at);
  if (!(base.grad.shape() == at.shape())) {
    throw ShapeError("grad_check", "gradient " + base.grad.shape().str() + " vs point " + at.shape().str());
  }
  if (!std::isfinite(base.value) || !base.grad.all_finite()) {
    throw NumericError("grad_check: non-finite value or gradient at the base point");
  }

  std::vector<std::size_t> coords = options.coordinates;
  if (coords.empty()) {
    coords.resize(at.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  }

  double grad_scale = 0;
  for (double g : base.grad.data()) grad_scale = std::max(grad_scale, std::abs(g));
  const double floor = std::max(options.floor, options.relative_floor * grad_scale);
  auto value_at = [&](const TensorD& x) { return options.value_fn ? options.value_fn(x) : fn(x).value; };

  GradCheckReport report;
  TensorD probe = at;
  for (std::size_t i : coords) {
    if (i >= at.size()) throw ShapeError("grad_check", "coordinate", at.size(), i);
    const double original = probe[i];
    probe[i] = original + options.step;
    const double plus = value_at(probe);
    const bool plus_smooth = !options.same_piece || options.same_piece(probe);
    probe[i] = original - options.step;
    const double minus = value_at(probe);
    const bool minus_smooth = !options.same_piece || options.same_piece(probe);
    probe[i] = original;
    if (!plus_smooth || !minus_smooth) {
      ++report.skipped;
      continue;
    }
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("grad_check: non-finite value at coordinate " + std::to_string(i));
    }
    const double numeric = (plus - minus) / (2 * options.step);
    const double err = relative_error(base.grad[i], numeric, floor);
    if (err > report.max_rel_error || report.checked == 0) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.worst_analytic = base.grad[i];
      report.worst_numeric = numeric;
    }
    ++report.checked;
  }
  return report;
}

}  // namespace pnnet
