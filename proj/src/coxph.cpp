#include "mmsurv/coxph.hpp"

#include "mmsurv/kernels.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmsurv {

namespace {

// Subjects sorted by descending time, grouped by equal time.
struct RiskSets {
  std::vector<Eigen::Index> order;
  std::vector<std::size_t> group_start;  // into order, plus a final sentinel
  std::size_t n_events = 0;

  RiskSets(std::span<const SurvivalOutcome> outcomes) {
    order.resize(outcomes.size());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return outcomes[static_cast<std::size_t>(a)].duration_days >
             outcomes[static_cast<std::size_t>(b)].duration_days;
    });
    for (std::size_t p = 0; p < order.size(); ++p) {
      if (p == 0 || outcomes[static_cast<std::size_t>(order[p])].duration_days !=
                        outcomes[static_cast<std::size_t>(order[p - 1])].duration_days) {
        group_start.push_back(p);
      }
      if (outcomes[static_cast<std::size_t>(order[p])].event) ++n_events;
    }
    group_start.push_back(order.size());
  }
};

void check_inputs(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                  std::span<const double> beta) {
  if (static_cast<std::size_t>(x.rows()) != outcomes.size()) throw Error("row count mismatch");
  if (static_cast<std::size_t>(x.cols()) != beta.size()) throw Error("dimension mismatch");
  if (outcomes.empty()) throw Error("no subjects");
  if (!x.allFinite()) throw Error("non-finite covariates");
}

Vector linear_predictor(const Matrix& x, std::span<const double> beta) {
  return kernels::serial::linear_predictor(x, beta);
}

double penalty(std::span<const double> beta, double alpha) {
  double ss = 0.0;
  for (double b : beta) ss += b * b;
  return 0.5 * alpha * ss;
}

double loglik_value(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                    const RiskSets& rs, std::span<const double> beta, double alpha) {
  const Vector eta = linear_predictor(x, beta);
  const double shift = eta.maxCoeff();
  double s0 = 0.0;
  double ll = 0.0;
  for (std::size_t g = 0; g + 1 < rs.group_start.size(); ++g) {
    const std::size_t lo = rs.group_start[g], hi = rs.group_start[g + 1];
    for (std::size_t p = lo; p < hi; ++p) s0 += std::exp(eta[rs.order[p]] - shift);
    const double log_s0 = std::log(s0) + shift;
    for (std::size_t p = lo; p < hi; ++p) {
      const auto i = rs.order[p];
      if (outcomes[static_cast<std::size_t>(i)].event) ll += eta[i] - log_s0;
    }
  }
  return ll - penalty(beta, alpha);
}

PartialLikelihood evaluate(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                           const RiskSets& rs, std::span<const double> beta, double alpha) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Vector eta = linear_predictor(x, beta);
  const double shift = eta.maxCoeff();
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = std::exp(eta[i] - shift);

  PartialLikelihood out;
  out.gradient = Vector::Zero(d);
  double s0 = 0.0;
  Vector s1 = Vector::Zero(d);

  // Per distinct event time, in descending time order.
  std::vector<double> inv_s0_times_d;
  std::vector<double> event_time_of_group;
  std::vector<double> event_counts;
  std::vector<Vector> mean_rows;

  double ll = 0.0;
  for (std::size_t g = 0; g + 1 < rs.group_start.size(); ++g) {
    const std::size_t lo = rs.group_start[g], hi = rs.group_start[g + 1];
    for (std::size_t p = lo; p < hi; ++p) {
      const auto i = rs.order[p];
      s0 += w[i];
      s1.noalias() += w[i] * x.row(i).transpose();
    }
    double d_k = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      const auto i = rs.order[p];
      if (!outcomes[static_cast<std::size_t>(i)].event) continue;
      d_k += 1.0;
      ll += eta[i];
      out.gradient.noalias() += x.row(i).transpose();
    }
    if (d_k == 0.0) continue;
    const double log_s0 = std::log(s0) + shift;
    ll -= d_k * log_s0;
    const Vector mean = s1 / s0;
    out.gradient.noalias() -= d_k * mean;
    inv_s0_times_d.push_back(d_k / s0);
    event_time_of_group.push_back(
        static_cast<double>(outcomes[static_cast<std::size_t>(rs.order[lo])].duration_days));
    event_counts.push_back(d_k);
    mean_rows.push_back(mean);
  }

  // sum_k d_k S2_k / S0_k = X^T diag(w_j * c(T_j)) X with
  // c(T) = sum_{event times t_k <= T} d_k / S0_k.
  Vector weight(n);
  {
    // Walk subjects in ascending time, accumulating the event-time terms.
    std::size_t k = inv_s0_times_d.size();
    double c = 0.0;
    for (std::size_t p = rs.order.size(); p-- > 0;) {
      const auto i = rs.order[p];
      const auto t = static_cast<double>(outcomes[static_cast<std::size_t>(i)].duration_days);
      while (k > 0 && event_time_of_group[k - 1] <= t) {
        c += inv_s0_times_d[k - 1];
        --k;
      }
      weight[i] = w[i] * c;
    }
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(mean_rows.size()), d);
  for (std::size_t k = 0; k < mean_rows.size(); ++k) {
    m.row(static_cast<Eigen::Index>(k)) = std::sqrt(event_counts[k]) * mean_rows[k].transpose();
  }
  out.hessian = m.transpose() * m;
  out.hessian.noalias() -= x.transpose() * weight.asDiagonal() * x;
  out.hessian.diagonal().array() -= alpha;

  for (Eigen::Index j = 0; j < d; ++j) out.gradient[j] -= alpha * beta[static_cast<std::size_t>(j)];
  out.loglik = ll - penalty(beta, alpha);
  return out;
}

}  // namespace

PartialLikelihood partial_loglik(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                                 std::span<const double> beta, double alpha) {
  check_inputs(x, outcomes, beta);
  const RiskSets rs(outcomes);
  if (rs.n_events == 0) throw Error("no events");
  return evaluate(x, outcomes, rs, beta, alpha);
}

CoxModel cox_fit(const Matrix& x, std::span<const SurvivalOutcome> outcomes, double alpha,
                 const FitConfig& config) {
  if (config.max_iter <= 0 || config.tol <= 0.0 || config.step_halving_max <= 0) {
    throw Error("fit config values must be positive");
  }
  if (alpha < 0.0) throw Error("alpha must be nonnegative");
  std::vector<double> beta(static_cast<std::size_t>(x.cols()), 0.0);
  check_inputs(x, outcomes, beta);
  const RiskSets rs(outcomes);
  if (rs.n_events == 0) throw Error("no events");

  CoxModel model;
  model.alpha = alpha;
  PartialLikelihood current = evaluate(x, outcomes, rs, beta, alpha);
  // The acceptance test and the trace both use the value-only path so that
  // summation-order differences with evaluate() cannot fake a decrease.
  double current_ll = loglik_value(x, outcomes, rs, beta, alpha);
  model.loglik_trace.push_back(current_ll);

  std::vector<double> candidate(beta.size());
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    model.n_iter = iter;
    const Eigen::MatrixXd neg_hessian = -current.hessian;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw Error("singular system");
    const Vector delta = ldlt.solve(current.gradient);
    if (!delta.allFinite()) throw Error("singular system");

    const double full_step = delta.cwiseAbs().maxCoeff();
    if (full_step < config.tol) {
      model.converged = true;
      break;
    }

    double step = 1.0;
    bool accepted = false;
    double candidate_ll = 0.0;
    for (int h = 0; h <= config.step_halving_max; ++h) {
      for (std::size_t j = 0; j < beta.size(); ++j) {
        candidate[j] = beta[j] + step * delta[static_cast<Eigen::Index>(j)];
      }
      candidate_ll = loglik_value(x, outcomes, rs, candidate, alpha);
      if (std::isfinite(candidate_ll) && candidate_ll >= current_ll) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    beta = candidate;
    current = evaluate(x, outcomes, rs, beta, alpha);
    current_ll = candidate_ll;
    model.loglik_trace.push_back(current_ll);
    if (step * full_step < config.tol) {
      model.converged = true;
      break;
    }
  }

  model.beta = std::move(beta);
  model.baseline_cumhaz = breslow_baseline(x, outcomes, model.beta);
  return model;
}

Vector cox_risk(const CoxModel& model, const Matrix& x) {
  return kernels::omp::linear_predictor(x, model.beta);
}

StepFunction breslow_baseline(const Matrix& x, std::span<const SurvivalOutcome> outcomes,
                              std::span<const double> beta) {
  check_inputs(x, outcomes, beta);
  const RiskSets rs(outcomes);
  if (rs.n_events == 0) throw Error("no events");
  const Vector eta = linear_predictor(x, beta);

  std::vector<double> times;
  std::vector<double> jumps;
  double risk_sum = 0.0;
  for (std::size_t g = 0; g + 1 < rs.group_start.size(); ++g) {
    const std::size_t lo = rs.group_start[g], hi = rs.group_start[g + 1];
    double deaths = 0.0;
    for (std::size_t p = lo; p < hi; ++p) {
      const auto i = rs.order[p];
      risk_sum += std::exp(eta[i]);
      if (outcomes[static_cast<std::size_t>(i)].event) deaths += 1.0;
    }
    if (deaths > 0.0) {
      times.push_back(static_cast<double>(outcomes[static_cast<std::size_t>(rs.order[lo])].duration_days));
      jumps.push_back(deaths / risk_sum);
    }
  }
  StepFunction h0{{}, {}, 0.0};
  double cum = 0.0;
  for (std::size_t k = times.size(); k-- > 0;) {
    cum += jumps[k];
    h0.times.push_back(times[k]);
    h0.values.push_back(cum);
  }
  return h0;
}

std::vector<double> cox_survival(const CoxModel& model, std::span<const double> x,
                                 std::span<const double> times) {
  if (x.size() != model.beta.size()) throw Error("dimension mismatch");
  double eta = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) eta += x[j] * model.beta[j];
  const double rel = std::exp(eta);
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(std::exp(-model.baseline_cumhaz(t) * rel));
  return out;
}

Matrix cox_survival_matrix(const CoxModel& model, const Matrix& x, std::span<const double> times) {
  const Vector eta = cox_risk(model, x);
  std::vector<double> h0(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) h0[k] = model.baseline_cumhaz(times[k]);
  Matrix out(x.rows(), static_cast<Eigen::Index>(times.size()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double rel = std::exp(eta[i]);
    for (std::size_t k = 0; k < times.size(); ++k) {
      out(i, static_cast<Eigen::Index>(k)) = std::exp(-h0[k] * rel);
    }
  }
  return out;
}

nlohmann::ordered_json to_json(const CoxModel& model) {
  nlohmann::ordered_json j;
  j["beta"] = model.beta;
  j["alpha"] = model.alpha;
  j["baseline"] = {{"time", model.baseline_cumhaz.times}, {"value", model.baseline_cumhaz.values}};
  j["n_iter"] = model.n_iter;
  j["converged"] = model.converged;
  return j;
}

}  // namespace mmsurv
