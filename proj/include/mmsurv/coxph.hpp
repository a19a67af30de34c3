#pragma once

#include "mmsurv/cohort.hpp"
#include "mmsurv/common.hpp"
#include "mmsurv/step_function.hpp"

#include <json.hpp>

#include <span>
#include <vector>

namespace mmsurv {

inline constexpr double kDefaultRidgeAlpha = 0.1;

struct FitConfig {
  int max_iter = 100;
  double tol = 1e-9;  // on max |change in beta|
  int step_halving_max = 30;
};

struct CoxModel {
  std::vector<double> beta;
  double alpha = kDefaultRidgeAlpha;
  StepFunction baseline_cumhaz{{}, {}, 0.0};  // Breslow H0(t)
  int n_iter = 0;
  bool converged = false;
  // Penalized log partial likelihood at beta = 0 and after each accepted step.
  std::vector<double> loglik_trace;
};

struct PartialLikelihood {
  double loglik = 0.0;
  Vector gradient;
  Eigen::MatrixXd hessian;  // includes the -alpha * I penalty term
};

// Breslow partial log-likelihood with ridge penalty:
//   l(b) = sum_{events i} [x_i b - log sum_{T_j >= T_i} exp(x_j b)] - (alpha/2) |b|^2
PartialLikelihood partial_loglik(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                                 std::span<const double> beta, double alpha);

// Newton-Raphson from beta = 0 with step halving.
CoxModel cox_fit(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                 double alpha = kDefaultRidgeAlpha, const FitConfig& config = {});

// Linear predictor x * beta.
Vector cox_risk(const CoxModel& model, const Matrix& x);

StepFunction breslow_baseline(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                              std::span<const double> beta);

// S(t | x) = exp(-H0(t) exp(x beta)).
std::vector<double> cox_survival(const CoxModel& model, std::span<const double> x,
                                 std::span<const double> times);
// Rows of `x` evaluated on `times`: n x |times|.
Matrix cox_survival_matrix(const CoxModel& model, const Matrix& x, std::span<const double> times);

nlohmann::ordered_json to_json(const CoxModel& model);

}  // namespace mmsurv
