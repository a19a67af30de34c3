#pragma once

// Per-row bodies shared by the serial and OpenMP kernel translation units.

#include "mmsurv/kernels.hpp"

#include <algorithm>

namespace mmsurv::kernels::detail {

inline void check_standardize(const Matrix& x, std::span<const double> means,
                              std::span<const double> stds) {
  if (static_cast<std::size_t>(x.cols()) != means.size() || means.size() != stds.size()) {
    throw Error("dimension mismatch");
  }
}

inline void standardize_row(const Matrix& x, Eigen::Index i, std::span<const double> means,
                            std::span<const double> stds, Matrix& out) {
  const double* src = x.data() + i * x.cols();
  double* dst = out.data() + i * out.cols();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto jj = static_cast<std::size_t>(j);
    dst[j] = (src[j] - means[jj]) / stds[jj];
  }
}

inline void check_project(const Matrix& x, std::span<const double> center, const Matrix& components) {
  if (static_cast<std::size_t>(x.cols()) != center.size() || components.cols() != x.cols()) {
    throw Error("dimension mismatch");
  }
}

inline void project_row(const Matrix& x, Eigen::Index i, std::span<const double> center,
                        const Matrix& components, std::vector<double>& scratch, Matrix& out) {
  const Eigen::Index d = x.cols();
  const double* src = x.data() + i * d;
  scratch.resize(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) scratch[static_cast<std::size_t>(j)] = src[j] - center[static_cast<std::size_t>(j)];
  for (Eigen::Index c = 0; c < components.rows(); ++c) {
    const double* comp = components.data() + c * d;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) acc += scratch[static_cast<std::size_t>(j)] * comp[j];
    out(i, c) = acc;
  }
}

inline double dot_row(const Matrix& x, Eigen::Index i, std::span<const double> beta) {
  const double* src = x.data() + i * x.cols();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) acc += src[j] * beta[static_cast<std::size_t>(j)];
  return acc;
}

inline void check_pairs(std::span<const double> times, std::span<const std::uint8_t> events,
                        std::span<const double> risks) {
  if (times.size() != events.size() || times.size() != risks.size()) {
    throw Error("length mismatch");
  }
}

inline PairCounts pairs_for_index(std::span<const double> times, std::span<const std::uint8_t> events,
                                  std::span<const double> risks, std::size_t i) {
  PairCounts c;
  if (!events[i]) return c;
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!(times[i] < times[j])) continue;
    ++c.comparable;
    if (risks[i] > risks[j]) {
      ++c.concordant;
    } else if (risks[i] < risks[j]) {
      ++c.discordant;
    } else {
      ++c.tied_risk;
    }
  }
  return c;
}

inline void check_auc(std::span<const double> times, std::span<const std::uint8_t> events,
                      std::span<const double> weights, std::span<const double> risks) {
  if (times.size() != events.size() || times.size() != weights.size() ||
      times.size() != risks.size()) {
    throw Error("length mismatch");
  }
}

// Control risks are sorted once per time, so each case is placed with two
// binary searches. `above` counts halves exactly, so the result does not
// depend on how the controls are ordered.
inline AucTerms auc_terms_at(std::span<const double> times, std::span<const std::uint8_t> events,
                             std::span<const double> weights, std::span<const double> risks,
                             double t, std::vector<double>& controls) {
  AucTerms out;
  controls.clear();
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (times[j] > t) controls.push_back(risks[j]);
  }
  std::sort(controls.begin(), controls.end());
  out.n_controls = static_cast<std::int64_t>(controls.size());
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] <= t && events[i])) continue;
    ++out.n_cases;
    weight_sum += weights[i];
    const auto lo = std::lower_bound(controls.begin(), controls.end(), risks[i]);
    const auto hi = std::upper_bound(lo, controls.end(), risks[i]);
    const double above = static_cast<double>(lo - controls.begin()) + 0.5 * static_cast<double>(hi - lo);
    out.numerator += weights[i] * above;
  }
  out.denominator = weight_sum * static_cast<double>(out.n_controls);
  return out;
}

}  // namespace mmsurv::kernels::detail
