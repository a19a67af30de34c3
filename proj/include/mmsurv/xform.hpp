#pragma once

#include "mmsurv/common.hpp"

#include <vector>

namespace mmsurv {

struct StandardizerParams {
  std::vector<double> means;
  std::vector<double> stds;  // population std; values below 1e-12 replaced by 1

  friend bool operator==(const StandardizerParams&, const StandardizerParams&) = default;
};

inline constexpr double kStdGuard = 1e-12;

StandardizerParams standardize_fit(const Matrix& train);
Matrix standardize_apply(const StandardizerParams& params, const Matrix& x);

struct PcaModel {
  Matrix components;  // q x d, orthonormal rows
  std::vector<double> train_means;
  std::vector<double> explained_variance;  // nonincreasing, singular^2 / (n - 1)

  Eigen::Index q() const { return components.rows(); }
  Eigen::Index d() const { return components.cols(); }
};

// Full thin SVD of the centered training matrix, kept so that any number of
// leading components can be taken without refitting. Components are the right
// singular vectors in descending singular-value order, each flipped so that its
// largest-magnitude entry is positive (first such entry on ties).
class PcaBasis {
 public:
  static PcaBasis fit(const Matrix& train_standardized);

  // Leading q components; 1 <= q <= max_dim().
  PcaModel truncate(Eigen::Index q) const;
  Eigen::Index max_dim() const { return max_dim_; }

 private:
  Matrix components_;
  std::vector<double> means_;
  std::vector<double> variance_;
  Eigen::Index max_dim_ = 0;
};

// Requires 1 <= q <= min(n - 1, d), else Error("pca dim out of range").
PcaModel pca_fit(const Matrix& train_standardized, Eigen::Index q);
Matrix pca_apply(const PcaModel& model, const Matrix& x);

}  // namespace mmsurv
