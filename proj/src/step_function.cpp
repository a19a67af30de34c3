#include "mmsurv/step_function.hpp"

#include <algorithm>

namespace mmsurv {

double StepFunction::operator()(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

std::vector<double> StepFunction::sample(const std::vector<double>& grid) const {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back((*this)(t));
  return out;
}

}  // namespace mmsurv
