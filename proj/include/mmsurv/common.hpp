#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmsurv {

// Row-major so that per-patient rows are contiguous for the row kernels.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by metrics that have no comparable pairs / cases to work with.
class NotComputable : public Error {
 public:
  NotComputable() : Error("not computable") {}
  explicit NotComputable(const std::string& what) : Error(what) {}
};

}  // namespace mmsurv
