#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace stdgmrf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// A state sequence x_{0:K} is stored flattened, step-major: step k occupies
// [k*N, (k+1)*N). Matches the vectorized layout used throughout the solvers.
inline Eigen::VectorBlock<Vec> step(Vec& x, int k, int n) {
  return x.segment(static_cast<Eigen::Index>(k) * n, n);
}
inline Eigen::VectorBlock<const Vec> step(const Vec& x, int k, int n) {
  return x.segment(static_cast<Eigen::Index>(k) * n, n);
}

}  // namespace stdgmrf
