#pragma once

#include <vector>

namespace mmsurv {

// Right-continuous step function: `initial` before times[0], values[i] on
// [times[i], times[i+1]). times are strictly increasing.
struct StepFunction {
  std::vector<double> times;
  std::vector<double> values;
  double initial = 1.0;

  double operator()(double t) const;
  // Limit from the left, f(t-).
  double left_limit(double t) const;
  std::vector<double> sample(const std::vector<double>& grid) const;

  friend bool operator==(const StepFunction&, const StepFunction&) = default;
};

}  // namespace mmsurv
