#include <doctest.h>

#include <random>

#include "care/baselines.hpp"
#include "care/spectral.hpp"

using namespace care;

namespace {

SplrDecomposition with_l(const Eigen::MatrixXd& l) {
  SplrDecomposition d;
  d.l = l;
  d.s = Eigen::MatrixXd::Identity(l.rows(), l.cols());
  return d;
}

ScoreMatrix from_matrix(const Eigen::MatrixXd& x) {
  ScoreMatrix m;
  m.values = x;
  m.judge_names.resize(x.cols());
  for (int j = 0; j < x.cols(); ++j) m.judge_names[j] = "j" + std::to_string(j);
  return m;
}

}  // namespace

TEST_CASE("extract_factors on a rank-1 L") {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(4);
  u(0) = 1.0;
  LatentFactors f = extract_factors(with_l(2.0 * u * u.transpose()));
  REQUIRE(f.h() == 1);
  CHECK(f.eigvals(0) == doctest::Approx(2.0));
  CHECK(std::abs(f.eigvecs.col(0).dot(u)) == doctest::Approx(1.0));
}

TEST_CASE("extract_factors recovers orthonormal planted factors") {
  Eigen::VectorXd u1(3), u2(3);
  u1 << 1, 1, 1;
  u1.normalize();
  u2 << 1, -1, 0;
  u2.normalize();
  Eigen::MatrixXd l = 3.0 * u1 * u1.transpose() + 1.0 * u2 * u2.transpose();
  LatentFactors f = extract_factors(with_l(l));
  REQUIRE(f.h() == 2);
  CHECK(f.eigvals(0) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(f.eigvals(1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(f.eigvecs.col(0).dot(u1)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(f.eigvecs.col(1).dot(u2)) == doctest::Approx(1.0).epsilon(1e-10));
  // Orthonormality of the retained columns.
  Eigen::MatrixXd gram = f.eigvecs.transpose() * f.eigvecs;
  CHECK((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("extract_factors rejects a numerically zero L") {
  CHECK_THROWS(extract_factors(with_l(Eigen::MatrixXd::Zero(3, 3))));
}

TEST_CASE("break_symmetry with a single factor picks it under every rule") {
  Eigen::VectorXd u = Eigen::VectorXd::Ones(4).normalized();
  LatentFactors f = extract_factors(with_l(u * u.transpose()));
  for (SymmetryRule rule : {SymmetryRule::leading, SymmetryRule::balanced}) {
    LatentFactors g = f;
    break_symmetry(g, rule);
    CHECK(g.quality_index == 0);
  }
}

TEST_CASE("balanced rule prefers the spread-out factor") {
  // Herfindahl 1.0 for the concentrated factor vs 0.25 for the uniform one.
  Eigen::VectorXd u1 = Eigen::VectorXd::Zero(4);
  u1(0) = 1.0;
  Eigen::VectorXd u2 = Eigen::VectorXd::Constant(4, 0.5);
  CHECK(loading_concentration(u1) == doctest::Approx(1.0));
  CHECK(loading_concentration(u2) == doctest::Approx(0.25));

  Eigen::MatrixXd l = 2.0 * u1 * u1.transpose() + 1.0 * u2 * u2.transpose();
  LatentFactors f = extract_factors(with_l(l));
  break_symmetry(f, SymmetryRule::balanced);
  CHECK(std::abs(f.eigvecs.col(f.quality_index).dot(u2)) ==
        doctest::Approx(1.0).epsilon(1e-10));

  break_symmetry(f, SymmetryRule::leading);
  CHECK(f.quality_index == 0);
}

TEST_CASE("anchor rule picks the factor correlated with labels") {
  Eigen::VectorXd u1 = (Eigen::VectorXd(4) << 1, 1, 0, 0).finished().normalized();
  Eigen::VectorXd u2 = (Eigen::VectorXd(4) << 0, 0, 1, 1).finished().normalized();
  Eigen::MatrixXd l = 2.0 * u1 * u1.transpose() + 1.0 * u2 * u2.transpose();
  LatentFactors f = extract_factors(with_l(l));

  // Items vary along u2 only; anchors track that variation.
  Eigen::MatrixXd x(6, 4);
  for (int i = 0; i < 6; ++i) x.row(i) = (i - 2.5) * u2.transpose();
  ScoreMatrix m = from_matrix(x);
  AnchorSet anchors;
  anchors.items = {0, 1, 2, 3, 4, 5};
  anchors.labels.resize(6);
  anchors.labels << 0, 1, 2, 3, 4, 5;
  break_symmetry(f, SymmetryRule::anchor, anchors, &m);
  CHECK(std::abs(f.eigvecs.col(f.quality_index).dot(u2)) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("quality_weights plain and subtracted formulas") {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(3, 3);
  l(0, 0) = 2.0;
  l(1, 1) = 1.0;
  LatentFactors f = extract_factors(with_l(l));
  break_symmetry(f, SymmetryRule::leading);

  LatentFactors fp = f;
  quality_weights(fp, WeightMode::plain);
  CHECK(fp.weights(0) == doctest::Approx(2.0));
  CHECK(fp.weights(1) == doctest::Approx(0.0));

  LatentFactors fs = f;
  quality_weights(fs, WeightMode::confounder_subtracted);
  CHECK(fs.weights(0) == doctest::Approx(2.0));
  CHECK(fs.weights(1) == doctest::Approx(-1.0));
  CHECK(fs.weights(2) == doctest::Approx(0.0));
}

TEST_CASE("weight sign is canonicalized toward nonnegative sum") {
  Eigen::VectorXd u = -Eigen::VectorXd::Ones(3).normalized();
  LatentFactors f = extract_factors(with_l(u * u.transpose()));
  break_symmetry(f, SymmetryRule::leading);
  quality_weights(f, WeightMode::plain);
  CHECK(f.weights.sum() >= 0.0);
}

TEST_CASE("aggregate with uniform weights reproduces the AVG baseline") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(20, 4);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  ScoreMatrix m = from_matrix(x);

  LatentFactors f;
  f.eigvals = Eigen::VectorXd::Ones(1);
  f.eigvecs = Eigen::MatrixXd::Constant(4, 1, 0.5);
  f.quality_index = 0;
  f.weights = Eigen::VectorXd::Ones(4);
  QualityEstimates q = aggregate(m, f);
  BaselineOutput a = avg(m);
  CHECK((q.scores - a.scores).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aggregate on one judge returns that judge's calibrated score") {
  Eigen::MatrixXd x(5, 1);
  x << 1, 2, 3, 4, 5;
  ScoreMatrix m = from_matrix(x);
  LatentFactors f;
  f.eigvals = Eigen::VectorXd::Ones(1);
  f.eigvecs = Eigen::MatrixXd::Ones(1, 1);
  f.quality_index = 0;
  f.weights = Eigen::VectorXd::Ones(1);
  QualityEstimates q = aggregate(m, f);
  CHECK((q.scores - x.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aggregate calibration matches the requested mean and std") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(200, 3);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  ScoreMatrix m = from_matrix(x);
  LatentFactors f;
  f.eigvals = Eigen::VectorXd::Ones(1);
  f.eigvecs = Eigen::MatrixXd::Constant(3, 1, 1.0 / std::sqrt(3.0));
  f.quality_index = 0;
  f.weights = (Eigen::VectorXd(3) << 1.0, 0.5, -0.25).finished();
  CalibTarget t{4.0, 1.5};
  QualityEstimates q = aggregate(m, f, t);
  const double mean = q.scores.mean();
  const double sd =
      std::sqrt((q.scores.array() - mean).square().sum() / q.scores.size());
  CHECK(mean == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(sd == doctest::Approx(1.5).epsilon(1e-9));
}

TEST_CASE("judge permutation permutes weights and preserves scores") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g;
  const int p = 5;
  Eigen::MatrixXd a(p, p);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  Eigen::MatrixXd l = a * a.transpose();
  Eigen::MatrixXd x(30, p);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = g(rng);

  auto run = [&](const Eigen::MatrixXd& lm, const Eigen::MatrixXd& xm) {
    LatentFactors f = extract_factors(with_l(lm));
    break_symmetry(f, SymmetryRule::leading);
    quality_weights(f, WeightMode::confounder_subtracted);
    ScoreMatrix m = from_matrix(xm);
    return std::make_pair(f.weights, aggregate(m, f).scores);
  };

  std::vector<int> perm = {3, 0, 4, 1, 2};
  Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) pm(i, perm[i]) = 1.0;

  auto [w1, s1] = run(l, x);
  auto [w2, s2] = run(pm * l * pm.transpose(), x * pm.transpose());
  CHECK((w2 - pm * w1).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((s1 - s2).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("spearman ranks monotone data at +-1") {
  Eigen::VectorXd a(5), b(5);
  a << 1, 2, 3, 4, 5;
  b << 10, 20, 30, 40, 50;
  CHECK(spearman(a, b) == doctest::Approx(1.0));
  CHECK(spearman(a, (-b).eval()) == doctest::Approx(-1.0));
}
