#pragma once

#include "mmsurv/cohort.hpp"
#include "mmsurv/common.hpp"
#include "mmsurv/step_function.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mmsurv {

struct ConcordanceResult {
  double c_index = 0.0;
  std::int64_t n_concordant = 0;
  std::int64_t n_discordant = 0;
  std::int64_t n_tied_risk = 0;
  std::int64_t n_comparable = 0;
};

// Harrell's C. A pair (i, j) is comparable iff T_i < T_j and i had the event;
// tied risks count one half. Throws NotComputable with no comparable pairs.
ConcordanceResult concordance_index(std::span<const SurvivalOutcome> outcomes,
                                    std::span<const double> risks);

// Product-limit estimate with jumps at event times only.
StepFunction kaplan_meier(std::span<const SurvivalOutcome> outcomes);
// Kaplan-Meier of the censoring distribution (event indicator flipped).
StepFunction censoring_km(std::span<const SurvivalOutcome> outcomes);

enum class MeanAucWeighting {
  KaplanMeier,  // integral of AUC(t) dS(t) over the test-set KM, normalised
  Trapezoid,    // plain time average
};

struct AucCurve {
  std::vector<double> times;
  std::vector<double> values;  // NaN where the point is not valid
  std::vector<std::uint8_t> valid;  // 0 when a time has no cases or no controls
  double mean_auc = 0.0;
};

// IPCW cumulative/dynamic AUC. Censoring weights 1/G(T_i-) come from the
// Kaplan-Meier censoring estimate of `train_outcomes`. Every time must lie in
// [min test time, max test time). Throws NotComputable when no time is valid.
AucCurve cumulative_dynamic_auc(std::span<const SurvivalOutcome> train_outcomes,
                                std::span<const SurvivalOutcome> test_outcomes,
                                std::span<const double> risks, std::span<const double> times,
                                MeanAucWeighting weighting = MeanAucWeighting::KaplanMeier);

struct BrierCurve {
  std::vector<double> times;
  std::vector<double> values;
  double ibs = 0.0;
};

// surv(i, k) = predicted S(times[k] | x_i). IBS is the trapezoidal integral
// divided by (t_max - t_min); with a single time it is BS at that time.
BrierCurve brier_curve(std::span<const SurvivalOutcome> train_outcomes,
                       std::span<const SurvivalOutcome> test_outcomes, const Matrix& surv,
                       std::span<const double> times);

struct RiskGroups {
  double median = 0.0;
  std::vector<std::size_t> low;   // risk <= median
  std::vector<std::size_t> high;  // risk > median
  StepFunction low_curve;
  StepFunction high_curve;
};

RiskGroups risk_stratify(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes);

struct CurveBand {
  std::vector<double> mean;
  std::vector<double> std;  // population std across curves
};

CurveBand average_curves(std::span<const StepFunction> curves, const std::vector<double>& grid);

// `points` evenly spaced times on [start, end].
std::vector<double> evaluation_grid(double start = 365.0, double end = 1825.0, int points = 100);

struct MetricReport {
  ConcordanceResult concordance;
  AucCurve auc;
  BrierCurve brier;
};

}  // namespace mmsurv
