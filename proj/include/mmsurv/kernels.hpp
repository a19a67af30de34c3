#pragma once

#include "mmsurv/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

// Data-parallel inner loops. Every kernel exists twice: a plain serial loop
// kept as the reference, and an OpenMP version that splits the same loop
// across threads. Each output element is produced by the same sequential
// arithmetic in both, so results are bit-identical for any thread count.
namespace mmsurv::kernels {

struct PairCounts {
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t tied_risk = 0;
  std::int64_t comparable = 0;

  friend bool operator==(const PairCounts&, const PairCounts&) = default;
};

// Per evaluation time of the cumulative/dynamic AUC.
struct AucTerms {
  double numerator = 0.0;    // sum over cases i, controls j of w_i * [r_i > r_j] (+ w_i/2 on ties)
  double denominator = 0.0;  // (sum over cases of w_i) * |controls|
  std::int64_t n_cases = 0;
  std::int64_t n_controls = 0;

  friend bool operator==(const AucTerms&, const AucTerms&) = default;
};

#define MMSURV_KERNEL_DECLS                                                                   \
  /* (x - means) / stds, rowwise */                                                          \
  Matrix standardize_rows(const Matrix& x, std::span<const double> means,                    \
                          std::span<const double> stds);                                     \
  /* (x - center) * components^T, rowwise; components is q x d */                            \
  Matrix project_rows(const Matrix& x, std::span<const double> center,                       \
                      const Matrix& components);                                             \
  /* x * beta */                                                                             \
  Vector linear_predictor(const Matrix& x, std::span<const double> beta);                    \
  /* Harrell pair classification: (i, j) comparable iff time_i < time_j and event_i */       \
  PairCounts concordance_counts(std::span<const double> times, std::span<const std::uint8_t> events, \
                                std::span<const double> risks);                              \
  /* Cases T_i <= t with event (weight w_i), controls T_j > t, per eval time */              \
  std::vector<AucTerms> cumulative_dynamic_terms(                                            \
      std::span<const double> times, std::span<const std::uint8_t> events,                           \
      std::span<const double> case_weights, std::span<const double> risks,                   \
      std::span<const double> eval_times);

namespace serial {
MMSURV_KERNEL_DECLS
}  // namespace serial

namespace omp {
MMSURV_KERNEL_DECLS
}  // namespace omp

#undef MMSURV_KERNEL_DECLS

}  // namespace mmsurv::kernels
