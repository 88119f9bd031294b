#pragma once

#include <Eigen/Dense>

#include "care/dataio.hpp"
#include "care/partition.hpp"
#include "care/tensor3.hpp"

namespace care {

struct CovarianceEstimate {
  Eigen::MatrixXd sigma;  // p x p, symmetric
  double ridge = 0.0;     // ridge used downstream for inversion
};

struct PrecisionEstimate {
  Eigen::MatrixXd theta;    // p x p, symmetric
  double ridge_used = 0.0;  // ridge that made sigma invertible
};

/// Sample covariance (1/n) X^T X on centered columns (centering optional).
CovarianceEstimate covariance(const ScoreMatrix& m, bool center = true);

/// (sigma + ridge I)^-1 with ridge auto-escalating by decades up to 1e-2
/// until the smallest eigenvalue of the regularized matrix exceeds 1e-10.
PrecisionEstimate precision(const CovarianceEstimate& c);

/// Empirical third-order cross moment over the three judge groups, computed
/// on uncentered columns: T(a,b,c) = (1/n) sum_i x1_ia x2_ib x3_ic.
Tensor3 third_moment(const ScoreMatrix& m, const TriViewPartition& part,
                     bool center = false);

}  // namespace care
