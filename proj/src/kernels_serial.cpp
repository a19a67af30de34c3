#include "kernel_rows.hpp"

namespace mmsurv::kernels::serial {

Matrix standardize_rows(const Matrix& x, std::span<const double> means, std::span<const double> stds) {
  detail::check_standardize(x, means, stds);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) detail::standardize_row(x, i, means, stds, out);
  return out;
}

Matrix project_rows(const Matrix& x, std::span<const double> center, const Matrix& components) {
  detail::check_project(x, center, components);
  Matrix out(x.rows(), components.rows());
  std::vector<double> scratch;
  for (Eigen::Index i = 0; i < x.rows(); ++i) detail::project_row(x, i, center, components, scratch, out);
  return out;
}

Vector linear_predictor(const Matrix& x, std::span<const double> beta) {
  if (static_cast<std::size_t>(x.cols()) != beta.size()) throw Error("dimension mismatch");
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = detail::dot_row(x, i, beta);
  return out;
}

PairCounts concordance_counts(std::span<const double> times, std::span<const std::uint8_t> events,
                              std::span<const double> risks) {
  detail::check_pairs(times, events, risks);
  PairCounts total;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto c = detail::pairs_for_index(times, events, risks, i);
    total.concordant += c.concordant;
    total.discordant += c.discordant;
    total.tied_risk += c.tied_risk;
    total.comparable += c.comparable;
  }
  return total;
}

std::vector<AucTerms> cumulative_dynamic_terms(std::span<const double> times,
                                               std::span<const std::uint8_t> events,
                                               std::span<const double> case_weights,
                                               std::span<const double> risks,
                                               std::span<const double> eval_times) {
  detail::check_auc(times, events, case_weights, risks);
  std::vector<AucTerms> out(eval_times.size());
  std::vector<double> controls;
  for (std::size_t k = 0; k < eval_times.size(); ++k) {
    out[k] = detail::auc_terms_at(times, events, case_weights, risks, eval_times[k], controls);
  }
  return out;
}

}  // namespace mmsurv::kernels::serial
