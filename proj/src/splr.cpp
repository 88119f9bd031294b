#include "care/splr.hpp"

#include <cmath>
#include <stdexcept>

namespace care {

namespace {

double soft(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

}  // namespace

double splr_objective(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& s,
                      const Eigen::MatrixXd& l, double gamma_n, double tau) {
  const double fit = 0.5 * (theta - (s - l)).squaredNorm();
  double l1 = s.cwiseAbs().sum() - s.diagonal().cwiseAbs().sum();
  double nuc = l.trace();  // l is psd, nuclear norm equals trace
  return fit + gamma_n * (l1 + tau * nuc);
}

SplrDecomposition splr_decompose(const Eigen::MatrixXd& theta, double gamma_n,
                                 double tau, int max_iter, double tol) {
  const int p = static_cast<int>(theta.rows());
  if (theta.cols() != p) throw std::invalid_argument("theta must be square");
  if ((theta - theta.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("theta must be symmetric");
  if (gamma_n < 0 || tau < 0)
    throw std::invalid_argument("gamma_n and tau must be nonnegative");

  SplrDecomposition d;
  d.gamma_n = gamma_n;
  d.tau = tau;
  d.s = theta;
  d.l = Eigen::MatrixXd::Zero(p, p);

  double prev = splr_objective(theta, d.s, d.l, gamma_n, tau);
  d.objective_trace.push_back(prev);

  for (int it = 0; it < max_iter; ++it) {
    // S-step: prox of gamma_n ||.||_1 on off-diagonals of theta + L.
    Eigen::MatrixXd target = theta + d.l;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j)
        d.s(i, j) = (i == j) ? target(i, j) : soft(target(i, j), gamma_n);

    // L-step: spectral soft threshold of S - theta at gamma_n*tau, psd clip.
    Eigen::MatrixXd resid = d.s - theta;
    resid = 0.5 * (resid + resid.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(resid);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < p; ++i) ev(i) = std::max(0.0, ev(i) - gamma_n * tau);
    d.l = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    d.l = 0.5 * (d.l + d.l.transpose());

    const double obj = splr_objective(theta, d.s, d.l, gamma_n, tau);
    if (obj > prev + 1e-9)
      throw std::runtime_error("splr objective increased; solver bug");
    d.objective_trace.push_back(obj);
    const double rel = (prev - obj) / std::max(1.0, std::abs(prev));
    prev = obj;
    if (rel < tol) break;
  }
  return d;
}

}  // namespace care
