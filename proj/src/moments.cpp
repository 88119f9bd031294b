#include "care/moments.hpp"

#include <stdexcept>

namespace care {

Eigen::MatrixXd Tensor3::unfold(int mode) const {
  const int d0 = dims_[0], d1 = dims_[1], d2 = dims_[2];
  Eigen::MatrixXd out;
  switch (mode) {
    case 0:
      out.resize(d0, d1 * d2);
      for (int k = 0; k < d2; ++k)
        for (int j = 0; j < d1; ++j)
          for (int i = 0; i < d0; ++i) out(i, j + d1 * k) = (*this)(i, j, k);
      break;
    case 1:
      out.resize(d1, d0 * d2);
      for (int k = 0; k < d2; ++k)
        for (int j = 0; j < d1; ++j)
          for (int i = 0; i < d0; ++i) out(j, i + d0 * k) = (*this)(i, j, k);
      break;
    case 2:
      out.resize(d2, d0 * d1);
      for (int k = 0; k < d2; ++k)
        for (int j = 0; j < d1; ++j)
          for (int i = 0; i < d0; ++i) out(k, i + d0 * j) = (*this)(i, j, k);
      break;
    default:
      throw std::invalid_argument("unfold mode must be 0, 1 or 2");
  }
  return out;
}

void Tensor3::add_rank_one(double w, const Eigen::VectorXd& a,
                           const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  for (int k = 0; k < dims_[2]; ++k)
    for (int j = 0; j < dims_[1]; ++j) {
      const double bc = w * b(j) * c(k);
      for (int i = 0; i < dims_[0]; ++i) (*this)(i, j, k) += a(i) * bc;
    }
}

CovarianceEstimate covariance(const ScoreMatrix& m, bool center) {
  if (m.n() < 2) throw std::invalid_argument("covariance requires n >= 2");
  Eigen::MatrixXd x = m.values;
  if (center) x.rowwise() -= x.colwise().mean();
  CovarianceEstimate c;
  c.sigma = (x.transpose() * x) / static_cast<double>(m.n());
  c.sigma = 0.5 * (c.sigma + c.sigma.transpose());  // enforce exact symmetry
  return c;
}

PrecisionEstimate precision(const CovarianceEstimate& c) {
  const int p = static_cast<int>(c.sigma.rows());
  double ridge = c.ridge;
  for (;;) {
    Eigen::MatrixXd reg = c.sigma + ridge * Eigen::MatrixXd::Identity(p, p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reg);
    if (es.eigenvalues().minCoeff() > 1e-10) {
      PrecisionEstimate out;
      out.theta = es.eigenvectors() *
                  es.eigenvalues().cwiseInverse().asDiagonal() *
                  es.eigenvectors().transpose();
      out.theta = 0.5 * (out.theta + out.theta.transpose());
      out.ridge_used = ridge;
      return out;
    }
    if (ridge >= 1e-2)
      throw std::runtime_error("covariance singular even at max ridge 1e-2");
    ridge = (ridge == 0.0) ? 1e-10 : ridge * 10.0;
  }
}

Tensor3 third_moment(const ScoreMatrix& m, const TriViewPartition& part,
                     bool center) {
  for (const auto& g : part.groups)
    if (g.empty()) throw std::invalid_argument("empty partition group");
  const int n = m.n();
  const auto& g1 = part.groups[0];
  const auto& g2 = part.groups[1];
  const auto& g3 = part.groups[2];
  const int p1 = static_cast<int>(g1.size());
  const int p2 = static_cast<int>(g2.size());
  const int p3 = static_cast<int>(g3.size());

  Eigen::MatrixXd x1(n, p1), x2(n, p2), x3(n, p3);
  for (int j = 0; j < p1; ++j) x1.col(j) = m.values.col(g1[j]);
  for (int j = 0; j < p2; ++j) x2.col(j) = m.values.col(g2[j]);
  for (int j = 0; j < p3; ++j) x3.col(j) = m.values.col(g3[j]);
  if (center) {
    x1.rowwise() -= x1.colwise().mean();
    x2.rowwise() -= x2.colwise().mean();
    x3.rowwise() -= x3.colwise().mean();
  }

  Tensor3 t(p1, p2, p3);
  // Accumulate slice-by-slice: T(:,:,c) = (1/n) x1^T diag(x3_c) x2.
  for (int c = 0; c < p3; ++c) {
    Eigen::MatrixXd w1 = x1.array().colwise() * x3.col(c).array();
    Eigen::MatrixXd slice = (w1.transpose() * x2) / static_cast<double>(n);
    for (int b = 0; b < p2; ++b)
      for (int a = 0; a < p1; ++a) t(a, b, c) = slice(a, b);
  }
  return t;
}

}  // namespace care
