#include "kernel_rows.hpp"

#include <omp.h>

namespace mmsurv::kernels::omp {

Matrix standardize_rows(const Matrix& x, std::span<const double> means, std::span<const double> stds) {
  detail::check_standardize(x, means, stds);
  Matrix out(x.rows(), x.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < x.rows(); ++i) detail::standardize_row(x, i, means, stds, out);
  return out;
}

Matrix project_rows(const Matrix& x, std::span<const double> center, const Matrix& components) {
  detail::check_project(x, center, components);
  Matrix out(x.rows(), components.rows());
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < x.rows(); ++i) detail::project_row(x, i, center, components, scratch, out);
  }
  return out;
}

Vector linear_predictor(const Matrix& x, std::span<const double> beta) {
  if (static_cast<std::size_t>(x.cols()) != beta.size()) throw Error("dimension mismatch");
  Vector out(x.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = detail::dot_row(x, i, beta);
  return out;
}

PairCounts concordance_counts(std::span<const double> times, std::span<const std::uint8_t> events,
                              std::span<const double> risks) {
  detail::check_pairs(times, events, risks);
  std::int64_t concordant = 0, discordant = 0, tied = 0, comparable = 0;
  const auto n = static_cast<std::int64_t>(times.size());
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : concordant, discordant, tied, comparable)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto c = detail::pairs_for_index(times, events, risks, static_cast<std::size_t>(i));
    concordant += c.concordant;
    discordant += c.discordant;
    tied += c.tied_risk;
    comparable += c.comparable;
  }
  return {concordant, discordant, tied, comparable};
}

std::vector<AucTerms> cumulative_dynamic_terms(std::span<const double> times,
                                               std::span<const std::uint8_t> events,
                                               std::span<const double> case_weights,
                                               std::span<const double> risks,
                                               std::span<const double> eval_times) {
  detail::check_auc(times, events, case_weights, risks);
  std::vector<AucTerms> out(eval_times.size());
  const auto m = static_cast<std::int64_t>(eval_times.size());
#pragma omp parallel
  {
    std::vector<double> controls;
#pragma omp for schedule(dynamic)
    for (std::int64_t k = 0; k < m; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      out[kk] = detail::auc_terms_at(times, events, case_weights, risks, eval_times[kk], controls);
    }
  }
  return out;
}

}  // namespace mmsurv::kernels::omp
