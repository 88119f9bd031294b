#include "care/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace care {

double loading_concentration(const Eigen::VectorXd& u) {
  const double total = u.squaredNorm();
  if (total <= 0) return 1.0;
  double h = 0.0;
  for (int j = 0; j < u.size(); ++j) {
    const double share = u(j) * u(j) / total;
    h += share * share;
  }
  return h;
}

namespace {

Eigen::VectorXd ranks(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v(a) < v(b); });
  Eigen::VectorXd r(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v(idx[j + 1]) == v(idx[i])) ++j;
    const double avg = 0.5 * (i + j) + 1.0;  // average rank for ties
    for (int k = i; k <= j; ++k) r(idx[k]) = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd ra = ranks(a), rb = ranks(b);
  ra.array() -= ra.mean();
  rb.array() -= rb.mean();
  const double den = std::sqrt(ra.squaredNorm() * rb.squaredNorm());
  if (den == 0.0) throw std::runtime_error("spearman undefined for constant input");
  return ra.dot(rb) / den;
}

LatentFactors extract_factors(const SplrDecomposition& d) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.l);
  const int p = static_cast<int>(d.l.rows());
  std::vector<std::pair<double, int>> order;
  for (int i = 0; i < p; ++i)
    if (es.eigenvalues()(i) > 1e-8) order.emplace_back(es.eigenvalues()(i), i);
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  if (order.empty())
    throw std::runtime_error(
        "no latent structure in L; increase tau or check data");

  LatentFactors f;
  const int h = static_cast<int>(order.size());
  f.eigvals.resize(h);
  f.eigvecs.resize(p, h);
  for (int i = 0; i < h; ++i) {
    f.eigvals(i) = order[i].first;
    f.eigvecs.col(i) = es.eigenvectors().col(order[i].second);
  }
  return f;
}

void break_symmetry(LatentFactors& f, SymmetryRule rule,
                    const std::optional<AnchorSet>& anchors,
                    const ScoreMatrix* standardized) {
  switch (rule) {
    case SymmetryRule::leading:
      f.quality_index = 0;
      break;
    case SymmetryRule::balanced: {
      int best = 0;
      double best_c = loading_concentration(f.eigvecs.col(0));
      for (int i = 1; i < f.h(); ++i) {
        const double c = loading_concentration(f.eigvecs.col(i));
        if (c < best_c) {
          best_c = c;
          best = i;
        }
      }
      f.quality_index = best;
      break;
    }
    case SymmetryRule::anchor: {
      if (!anchors || anchors->items.size() < 2)
        throw std::invalid_argument("anchor rule needs >= 2 labeled items");
      if (!standardized)
        throw std::invalid_argument("anchor rule needs the score matrix");
      if ((anchors->labels.array() == anchors->labels(0)).all())
        throw std::invalid_argument("anchor labels are constant");
      const int m = static_cast<int>(anchors->items.size());
      int best = 0;
      double best_r = -1.0;
      for (int i = 0; i < f.h(); ++i) {
        Eigen::VectorXd proj(m);
        for (int k = 0; k < m; ++k)
          proj(k) = f.eigvecs.col(i).dot(
              standardized->values.row(anchors->items[k]));
        const double r = std::abs(spearman(proj, anchors->labels));
        if (r > best_r) {
          best_r = r;
          best = i;
        }
      }
      f.quality_index = best;
      break;
    }
  }
}

void quality_weights(LatentFactors& f, WeightMode mode) {
  if (f.quality_index < 0)
    throw std::logic_error("quality_index not set; call break_symmetry first");
  Eigen::VectorXd w =
      f.eigvals(f.quality_index) * f.eigvecs.col(f.quality_index);
  if (mode == WeightMode::confounder_subtracted) {
    for (int i = 0; i < f.h(); ++i) {
      if (i == f.quality_index) continue;
      w -= f.eigvals(i) * f.eigvecs.col(i);
    }
  }
  if (w.sum() < 0) w = -w;  // higher judge scores = higher quality
  f.weights = w;
}

QualityEstimates aggregate(const ScoreMatrix& standardized,
                           const LatentFactors& f,
                           const std::optional<CalibTarget>& calib) {
  if (f.weights.size() == 0)
    throw std::logic_error("weights not set; call quality_weights first");
  const double l1 = f.weights.cwiseAbs().sum();
  if (l1 == 0.0) throw std::runtime_error("zero aggregation weights");

  QualityEstimates q;
  q.scores = standardized.values * (f.weights / l1);
  if (calib) {
    const double mu = q.scores.mean();
    const double sd = std::sqrt(
        (q.scores.array() - mu).square().sum() / q.scores.size());
    q.calib_a = (sd > 0) ? calib->stddev / sd : 1.0;
    q.calib_b = calib->mean - q.calib_a * mu;
    q.scores = q.calib_a * q.scores.array() + q.calib_b;
  }
  return q;
}

}  // namespace care
