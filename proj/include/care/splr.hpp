#pragma once

#include <Eigen/Dense>
#include <vector>

namespace care {

/// Sparse-plus-low-rank split of a precision matrix: theta ~ s - l with
/// l positive semidefinite.
struct SplrDecomposition {
  Eigen::MatrixXd s;
  Eigen::MatrixXd l;
  double gamma_n = 0.0;
  double tau = 0.0;
  std::vector<double> objective_trace;
};

/// Minimize 0.5 ||theta - (S - L)||_F^2 + gamma_n (||S||_1,offdiag + tau ||L||_*)
/// subject to L psd, by alternating exact proximal steps:
///   S-step: entrywise soft threshold of (theta + L) at gamma_n, diagonal free;
///   L-step: eigenvalue soft threshold of (S - theta) at gamma_n*tau, clipped
///           to the psd cone.
/// Stops when the relative objective decrease falls below tol.
SplrDecomposition splr_decompose(const Eigen::MatrixXd& theta, double gamma_n,
                                 double tau, int max_iter = 5000,
                                 double tol = 1e-8);

double splr_objective(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& s,
                      const Eigen::MatrixXd& l, double gamma_n, double tau);

}  // namespace care
