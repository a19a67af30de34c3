#include "mmsurv/xform.hpp"

#include "mmsurv/kernels.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace mmsurv {

StandardizerParams standardize_fit(const Matrix& train) {
  if (train.rows() < 2) throw Error("degenerate fit");
  const auto n = static_cast<double>(train.rows());
  StandardizerParams p;
  p.means.assign(static_cast<std::size_t>(train.cols()), 0.0);
  p.stds.assign(static_cast<std::size_t>(train.cols()), 0.0);
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < train.rows(); ++i) sum += train(i, j);
    const double mean = sum / n;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < train.rows(); ++i) {
      const double dev = train(i, j) - mean;
      ss += dev * dev;
    }
    const double sd = std::sqrt(ss / n);
    if (!std::isfinite(mean) || !std::isfinite(sd)) throw Error("non-finite input to standardize_fit");
    p.means[static_cast<std::size_t>(j)] = mean;
    p.stds[static_cast<std::size_t>(j)] = sd < kStdGuard ? 1.0 : sd;
  }
  return p;
}

Matrix standardize_apply(const StandardizerParams& params, const Matrix& x) {
  return kernels::omp::standardize_rows(x, params.means, params.stds);
}

PcaBasis PcaBasis::fit(const Matrix& train_standardized) {
  const Eigen::Index n = train_standardized.rows();
  const Eigen::Index d = train_standardized.cols();
  if (n < 2 || d < 1) throw Error("pca dim out of range");
  if (!train_standardized.allFinite()) throw Error("non-finite input to pca_fit");

  PcaBasis basis;
  basis.means_.assign(static_cast<std::size_t>(d), 0.0);
  Eigen::MatrixXd centered(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += train_standardized(i, j);
    const double mean = sum / static_cast<double>(n);
    basis.means_[static_cast<std::size_t>(j)] = mean;
    for (Eigen::Index i = 0; i < n; ++i) centered(i, j) = train_standardized(i, j) - mean;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::MatrixXd& v = svd.matrixV();
  const Eigen::VectorXd& s = svd.singularValues();

  basis.max_dim_ = std::min(n - 1, d);
  basis.components_.resize(basis.max_dim_, d);
  basis.variance_.resize(static_cast<std::size_t>(basis.max_dim_));
  for (Eigen::Index c = 0; c < basis.max_dim_; ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < d; ++j) {
      if (std::abs(v(j, c)) > std::abs(v(arg, c))) arg = j;
    }
    const double sign = v(arg, c) < 0.0 ? -1.0 : 1.0;
    for (Eigen::Index j = 0; j < d; ++j) basis.components_(c, j) = sign * v(j, c);
    basis.variance_[static_cast<std::size_t>(c)] = s[c] * s[c] / static_cast<double>(n - 1);
  }
  return basis;
}

PcaModel PcaBasis::truncate(Eigen::Index q) const {
  if (q < 1 || q > max_dim_) throw Error("pca dim out of range");
  PcaModel m;
  m.components = components_.topRows(q);
  m.train_means = means_;
  m.explained_variance.assign(variance_.begin(), variance_.begin() + q);
  return m;
}

PcaModel pca_fit(const Matrix& train_standardized, Eigen::Index q) {
  const Eigen::Index limit = std::min(train_standardized.rows() - 1, train_standardized.cols());
  if (q < 1 || q > limit) throw Error("pca dim out of range");
  return PcaBasis::fit(train_standardized).truncate(q);
}

Matrix pca_apply(const PcaModel& model, const Matrix& x) {
  return kernels::omp::project_rows(x, model.train_means, model.components);
}

}  // namespace mmsurv
