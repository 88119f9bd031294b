#include "care/tensor_path.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace care {

namespace {

// Khatri-Rao product (column-wise Kronecker), (rows(a)*rows(b)) x R, with
// b varying fastest to match Tensor3::unfold column ordering.
Eigen::MatrixXd khatri_rao(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int ra = static_cast<int>(a.rows());
  const int rb = static_cast<int>(b.rows());
  const int R = static_cast<int>(a.cols());
  Eigen::MatrixXd out(ra * rb, R);
  for (int r = 0; r < R; ++r)
    for (int i = 0; i < ra; ++i)
      out.block(i * rb, r, rb, 1) = a(i, r) * b.col(r);
  return out;
}

double reconstruction_error(const Tensor3& t, const Eigen::VectorXd& w,
                            const std::array<Eigen::MatrixXd, 3>& f) {
  Tensor3 rec(t.dim(0), t.dim(1), t.dim(2));
  for (int r = 0; r < w.size(); ++r)
    rec.add_rank_one(w(r), f[0].col(r), f[1].col(r), f[2].col(r));
  double num = 0.0;
  for (size_t i = 0; i < t.size(); ++i) {
    const double d = t.data()[i] - rec.data()[i];
    num += d * d;
  }
  const double den = t.norm();
  return den > 0 ? std::sqrt(num) / den : std::sqrt(num);
}

// Simultaneous-diagonalization initialization: two random mixtures of the
// mode-2 slices M_u = A diag(w .* C'u) B', M_v = A diag(w .* C'v) B' share
// eigenvectors, so the eigenvectors of M_u M_v^+ (restricted to the rank-R
// range of M_v) recover the mode-0 factor up to scale. The remaining modes
// follow from rank-one splits of pinv(A) * unfold(0). Exact on a noiseless
// rank-R tensor; a strong starting point otherwise.
bool slice_eig_init(const Tensor3& t, const Eigen::MatrixXd& u0, int R,
                    std::mt19937_64& rng, std::array<Eigen::MatrixXd, 3>& f) {
  const std::array<int, 3> dims = t.dims();
  const int d0 = dims[0], d1 = dims[1], d2 = dims[2];
  if (d0 < R) return false;

  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u(d2), v(d2);
  for (int k = 0; k < d2; ++k) {
    u(k) = gauss(rng);
    v(k) = gauss(rng);
  }
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(d0, d1);
  Eigen::MatrixXd mv = Eigen::MatrixXd::Zero(d0, d1);
  for (int k = 0; k < d2; ++k)
    for (int j = 0; j < d1; ++j)
      for (int i = 0; i < d0; ++i) {
        const double val = t(i, j, k);
        mu(i, j) += u(k) * val;
        mv(i, j) += v(k) * val;
      }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(mv, Eigen::ComputeThinU |
                                                Eigen::ComputeThinV);
  if (svd.singularValues().size() < R ||
      svd.singularValues()(R - 1) < 1e-12 * svd.singularValues()(0))
    return false;
  Eigen::MatrixXd p = svd.matrixU().leftCols(R);
  Eigen::MatrixXd q = svd.matrixV().leftCols(R);
  Eigen::VectorXd sr = svd.singularValues().head(R);
  Eigen::MatrixXd g =
      p.transpose() * mu * q * sr.cwiseInverse().asDiagonal();
  Eigen::ComplexEigenSolver<Eigen::MatrixXd> eig(g);
  if (eig.info() != Eigen::Success) return false;
  Eigen::MatrixXd a = (p * eig.eigenvectors()).real();
  for (int r = 0; r < R; ++r) {
    const double nrm = a.col(r).norm();
    if (!(nrm > 1e-12) || !a.col(r).allFinite()) return false;
    a.col(r) /= nrm;
  }

  // Rows of pinv(A) * unfold(0) are vec(w_r b_r c_r'), mode-1 index fastest.
  Eigen::MatrixXd m =
      a.completeOrthogonalDecomposition().pseudoInverse() * u0;
  f[0] = a;
  f[1].resize(d1, R);
  f[2].resize(d2, R);
  for (int r = 0; r < R; ++r) {
    Eigen::VectorXd row = m.row(r);
    Eigen::Map<const Eigen::MatrixXd> slab(row.data(), d1, d2);
    Eigen::JacobiSVD<Eigen::MatrixXd> rank1(slab, Eigen::ComputeThinU |
                                                      Eigen::ComputeThinV);
    const double s0 = rank1.singularValues()(0);
    f[1].col(r) = rank1.matrixU().col(0);
    f[2].col(r) = s0 * rank1.matrixV().col(0);
  }
  return f[1].allFinite() && f[2].allFinite();
}

}  // namespace

CpComponents cp_decompose(const Tensor3& t, int rank, int restarts,
                          std::uint64_t seed, int max_iter, double tol) {
  const int R = rank;
  const std::array<int, 3> dims = t.dims();
  const Eigen::MatrixXd u0 = t.unfold(0);
  const Eigen::MatrixXd u1 = t.unfold(1);
  const Eigen::MatrixXd u2 = t.unfold(2);
  const double tnorm = t.norm();
  if (tnorm == 0) throw std::invalid_argument("zero tensor");

  CpComponents best;
  best.fit = std::numeric_limits<double>::infinity();

  for (int rs = 0; rs < restarts; ++rs) {
    std::mt19937_64 rng(seed * 0x2545f4914f6cdd1dULL + rs + 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::array<Eigen::MatrixXd, 3> f;
    // Alternate spectral slice initializations with plain Gaussian ones.
    const bool spectral = (rs % 2 == 0) && slice_eig_init(t, u0, R, rng, f);
    if (!spectral) {
      for (int k = 0; k < 3; ++k) {
        f[k].resize(dims[k], R);
        for (int i = 0; i < dims[k]; ++i)
          for (int r = 0; r < R; ++r) f[k](i, r) = gauss(rng);
      }
    }

    double prev_err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
      // Mode 0: unfold(0) columns ordered (j + d1*k) -> kr(C, B)? Column
      // index j + d1*k means mode-1 index varies fastest, so kr has mode-2
      // slow, mode-1 fast: rows ordered k*d1 + j.
      {
        Eigen::MatrixXd kr = khatri_rao(f[2], f[1]);  // (d2*d1) x R, j fast
        Eigen::MatrixXd gram =
            (f[1].transpose() * f[1]).cwiseProduct(f[2].transpose() * f[2]);
        f[0] = u0 * kr * gram.completeOrthogonalDecomposition().pseudoInverse();
      }
      {
        // unfold(1) columns i + d0*k: mode-0 fast, mode-2 slow.
        Eigen::MatrixXd kr = khatri_rao(f[2], f[0]);
        Eigen::MatrixXd gram =
            (f[0].transpose() * f[0]).cwiseProduct(f[2].transpose() * f[2]);
        f[1] = u1 * kr * gram.completeOrthogonalDecomposition().pseudoInverse();
      }
      {
        // unfold(2) columns i + d0*j: mode-0 fast, mode-1 slow.
        Eigen::MatrixXd kr = khatri_rao(f[1], f[0]);
        Eigen::MatrixXd gram =
            (f[0].transpose() * f[0]).cwiseProduct(f[1].transpose() * f[1]);
        f[2] = u2 * kr * gram.completeOrthogonalDecomposition().pseudoInverse();
      }
      Eigen::VectorXd ones = Eigen::VectorXd::Ones(R);
      const double err = reconstruction_error(t, ones, f);
      if (prev_err - err < tol) {
        prev_err = err;
        break;
      }
      prev_err = err;
    }

    // Scaling convention: unit-norm view-2/3 columns, magnitude in view-1.
    Eigen::VectorXd w = Eigen::VectorXd::Ones(R);
    for (int r = 0; r < R; ++r) {
      const double nb = f[1].col(r).norm();
      const double nc = f[2].col(r).norm();
      if (nb > 0) f[1].col(r) /= nb;
      if (nc > 0) f[2].col(r) /= nc;
      f[0].col(r) *= nb * nc;
    }
    // Weights by least squares on the vectorized rank-1 terms.
    {
      Eigen::MatrixXd basis(static_cast<int>(t.size()), R);
      for (int r = 0; r < R; ++r) {
        Tensor3 one(dims[0], dims[1], dims[2]);
        one.add_rank_one(1.0, f[0].col(r), f[1].col(r), f[2].col(r));
        for (size_t i = 0; i < one.size(); ++i)
          basis(static_cast<int>(i), r) = one.data()[i];
      }
      Eigen::Map<const Eigen::VectorXd> tv(t.data(), static_cast<int>(t.size()));
      w = basis.completeOrthogonalDecomposition().solve(tv);
    }
    for (int r = 0; r < R; ++r) {
      if (w(r) < 0) {  // sign transfer to the view-1 column
        w(r) = -w(r);
        f[0].col(r) = -f[0].col(r);
      }
      if (w(r) == 0) w(r) = 1e-12;
    }
    const double err = reconstruction_error(t, w, f);
    if (err < best.fit) {
      best.fit = err;
      best.weights = w;
      best.factors = f;
    }
  }

  if (!(best.fit < 0.999))
    throw std::runtime_error(
        "cp decomposition failed on every restart; increase n or adjust "
        "(gamma_n, tau)");
  return best;
}

CpComponents resolve_scales(const CpComponents& cp, const ScoreMatrix& m,
                            const TriViewPartition& part) {
  const int R = cp.rank();
  const int n = m.n();

  // View data blocks (uncentered, same convention as the third moment).
  std::array<Eigen::MatrixXd, 3> x;
  for (int k = 0; k < 3; ++k) {
    const auto& g = part.groups[k];
    x[k].resize(n, static_cast<int>(g.size()));
    for (size_t j = 0; j < g.size(); ++j) x[k].col(j) = m.values.col(g[j]);
  }

  // Unit directions per view.
  std::array<Eigen::MatrixXd, 3> dir = cp.factors;
  std::array<Eigen::MatrixXd, 3> norms;  // 1 x R each (stored as vector)
  Eigen::MatrixXd colnorm(3, R);
  for (int k = 0; k < 3; ++k)
    for (int r = 0; r < R; ++r) {
      const double nn = dir[k].col(r).norm();
      colnorm(k, r) = nn;
      if (nn > 0) dir[k].col(r) /= nn;
    }
  (void)norms;

  // Total component magnitude in the tensor: w_r * prod of column norms.
  Eigen::VectorXd wt(R);
  for (int r = 0; r < R; ++r)
    wt(r) = cp.weights(r) * colnorm(0, r) * colnorm(1, r) * colnorm(2, r);

  // Pairwise cross moments M_ab = (1/n) X_a^T X_b = sum_r pi_r mu_a mu_b^T.
  // Fitting coefficients f_ab over the rank-1 basis dir_a dir_b^T gives
  // f_ab,r = pi_r s_a,r s_b,r with s the per-view mean magnitudes.
  auto fit_pair = [&](int a, int b) {
    Eigen::MatrixXd mab = (x[a].transpose() * x[b]) / static_cast<double>(n);
    Eigen::MatrixXd basis(mab.size(), R);
    for (int r = 0; r < R; ++r) {
      Eigen::MatrixXd one = dir[a].col(r) * dir[b].col(r).transpose();
      basis.col(r) = Eigen::Map<Eigen::VectorXd>(one.data(), one.size());
    }
    Eigen::Map<Eigen::VectorXd> mv(mab.data(), mab.size());
    return Eigen::VectorXd(
        basis.completeOrthogonalDecomposition().solve(mv));
  };
  Eigen::VectorXd f12 = fit_pair(0, 1);
  Eigen::VectorXd f13 = fit_pair(0, 2);
  Eigen::VectorXd f23 = fit_pair(1, 2);

  CpComponents out = cp;
  Eigen::VectorXd pi(R);
  for (int r = 0; r < R; ++r) {
    const double w = wt(r);
    if (std::abs(w) < 1e-14) {
      pi(r) = 1e-4;
      continue;
    }
    // pi = f12 f13 f23 / w^2 ; s_l = w / f_(other pair).
    pi(r) = f12(r) * f13(r) * f23(r) / (w * w);
    const double s1 = (std::abs(f23(r)) > 1e-14) ? w / f23(r) : 0.0;
    const double s2 = (std::abs(f13(r)) > 1e-14) ? w / f13(r) : 0.0;
    const double s3 = (std::abs(f12(r)) > 1e-14) ? w / f12(r) : 0.0;
    out.factors[0].col(r) = dir[0].col(r) * s1;
    out.factors[1].col(r) = dir[1].col(r) * s2;
    out.factors[2].col(r) = dir[2].col(r) * s3;
  }
  // Simplex projection with floor 1e-4.
  for (int r = 0; r < R; ++r) pi(r) = std::max(pi(r), 1e-4);
  pi /= pi.sum();
  out.weights = pi;
  return out;
}

std::array<Eigen::VectorXd, 4> assemble_means(const CpComponents& cp,
                                              const TriViewPartition& part) {
  if (cp.rank() != 4)
    throw std::invalid_argument("assemble_means expects rank 4");
  int p = 0;
  for (const auto& g : part.groups) p += static_cast<int>(g.size());
  for (int k = 0; k < 3; ++k)
    if (cp.factors[k].rows() != static_cast<long>(part.groups[k].size()))
      throw std::invalid_argument("factor shape does not match partition");

  std::array<Eigen::VectorXd, 4> means;
  for (int r = 0; r < 4; ++r) {
    means[r] = Eigen::VectorXd::Zero(p);
    for (int k = 0; k < 3; ++k)
      for (size_t j = 0; j < part.groups[k].size(); ++j)
        means[r](part.groups[k][j]) = cp.factors[k](static_cast<int>(j), r);
  }
  return means;
}

std::array<int, 4> identify_states(const std::array<Eigen::VectorXd, 4>& means,
                                   const Eigen::MatrixXd& l_hat) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l_hat);
  const int p = static_cast<int>(l_hat.rows());
  if (es.eigenvalues()(p - 1) <= 0)
    throw std::invalid_argument("l_hat has no positive eigenvalue");
  Eigen::VectorXd v = es.eigenvectors().col(p - 1);
  if (v.sum() < 0) v = -v;

  std::array<double, 4> score;
  for (int r = 0; r < 4; ++r) score[r] = v.dot(means[r]);

  std::array<int, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(score[a] - score[b]) > 1e-12) return score[a] > score[b];
    return a < b;  // deterministic tie-break
  });

  // order[0], order[1] are Q=1; within each Q pair, c ascending by score.
  std::array<int, 4> state{};
  state[order[0]] = 2 + 1;  // q=1, c=1 (higher score)
  state[order[1]] = 2 + 0;  // q=1, c=0
  state[order[2]] = 0 + 1;  // q=0, c=1
  state[order[3]] = 0 + 0;  // q=0, c=0
  return state;
}

std::array<int, 4> align_anchors(const std::array<Eigen::VectorXd, 4>& means,
                                 const std::array<Eigen::VectorXd, 4>& anchors) {
  std::array<int, 4> perm{0, 1, 2, 3};
  std::array<int, 4> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  std::sort(perm.begin(), perm.end());
  do {
    double cost = 0.0;
    for (int r = 0; r < 4; ++r)
      cost += (means[perm[r]] - anchors[r]).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

MixtureModel fit_within_covariance(const ScoreMatrix& m, MixtureModel mix,
                                   bool em_refine) {
  const int n = m.n(), p = m.p();

  std::vector<int> assign(n);
  std::array<int, 4> count{};
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int r = 0; r < 4; ++r) {
      const double d =
          (m.values.row(i).transpose() - mix.means[r]).squaredNorm();
      if (d < bd) {
        bd = d;
        best = r;
      }
    }
    assign[i] = best;
    ++count[best];
  }

  const bool any_empty =
      std::any_of(count.begin(), count.end(), [](int c) { return c == 0; });

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
  if (any_empty) {
    // Degenerate assignment: fall back to the global covariance.
    Eigen::MatrixXd x = m.values;
    x.rowwise() -= x.colwise().mean();
    cov = (x.transpose() * x) / static_cast<double>(n);
  } else {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd r = m.values.row(i).transpose() - mix.means[assign[i]];
      cov.noalias() += r * r.transpose();
    }
    cov /= static_cast<double>(n);
  }
  cov += 1e-6 * Eigen::MatrixXd::Identity(p, p);
  mix.cov = 0.5 * (cov + cov.transpose());

  if (em_refine) {
    // One soft pass updating the covariance only; means/weights frozen.
    PosteriorResult post = posterior(m, mix);
    Eigen::MatrixXd soft_cov = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < 4; ++r) {
        Eigen::VectorXd d = m.values.row(i).transpose() - mix.means[r];
        soft_cov.noalias() += post.responsibilities(i, r) * (d * d.transpose());
      }
    soft_cov /= static_cast<double>(n);
    soft_cov += 1e-6 * Eigen::MatrixXd::Identity(p, p);
    mix.cov = 0.5 * (soft_cov + soft_cov.transpose());
  }
  return mix;
}

PosteriorResult posterior(const ScoreMatrix& m, const MixtureModel& mix) {
  const int n = m.n(), p = m.p();
  Eigen::MatrixXd cov = mix.cov;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  double ridge = 1e-10;
  while (llt.info() != Eigen::Success) {
    if (ridge > 1e-2)
      throw std::runtime_error("mixture covariance not PD after max ridge");
    cov = mix.cov + ridge * Eigen::MatrixXd::Identity(p, p);
    llt.compute(cov);
    ridge *= 10.0;
  }

  PosteriorResult out;
  out.responsibilities.resize(n, 4);
  out.quality_prob.resize(n);
  const Eigen::MatrixXd L = llt.matrixL();

  for (int i = 0; i < n; ++i) {
    Eigen::Vector4d logp;
    for (int r = 0; r < 4; ++r) {
      Eigen::VectorXd d = m.values.row(i).transpose() - mix.means[r];
      Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(d);
      // Shared covariance: the log-det and 2*pi terms cancel in the softmax.
      logp(r) = std::log(std::max(mix.weights(r), 1e-300)) - 0.5 * z.squaredNorm();
    }
    const double mx = logp.maxCoeff();
    Eigen::Vector4d w = (logp.array() - mx).exp();
    w /= w.sum();
    out.responsibilities.row(i) = w.transpose();
    out.quality_prob(i) = w(2) + w(3);
  }
  return out;
}

}  // namespace care
