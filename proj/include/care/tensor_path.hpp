#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

#include "care/dataio.hpp"
#include "care/partition.hpp"
#include "care/tensor3.hpp"

namespace care {

/// Rank-R CP model of the three-view moment tensor. View-2/3 factor columns
/// are unit norm; magnitude sits in view-1 columns and the weights.
struct CpComponents {
  Eigen::VectorXd weights;                // length R, positive
  std::array<Eigen::MatrixXd, 3> factors; // p_l x R each
  double fit = 1.0;                       // relative reconstruction error
  int rank() const { return static_cast<int>(weights.size()); }
};

/// Four-component Gaussian mixture over the full judge vector. Component
/// r = 2q + c corresponds to latent state (Q=q, C=c).
struct MixtureModel {
  std::array<Eigen::VectorXd, 4> means;
  Eigen::Vector4d weights;
  Eigen::MatrixXd cov;
};

struct PosteriorResult {
  Eigen::MatrixXd responsibilities;  // n x 4, rows sum to 1
  Eigen::VectorXd quality_prob;      // Pr(Q=1 | J_i)
};

/// Multi-restart alternating least squares CP decomposition.
CpComponents cp_decompose(const Tensor3& t, int rank = 4, int restarts = 16,
                          std::uint64_t seed = 0, int max_iter = 200,
                          double tol = 1e-10);

/// Resolve the per-component scale ambiguity of the CP factors using the
/// empirical pairwise cross moments of the data, so factor columns sit on the
/// conditional-mean scale and weights estimate mixture proportions (projected
/// to the simplex with floor 1e-4).
CpComponents resolve_scales(const CpComponents& cp, const ScoreMatrix& m,
                            const TriViewPartition& part);

/// Concatenate the three view blocks of each component back into full
/// p-vectors at the original judge indices.
std::array<Eigen::VectorXd, 4> assemble_means(const CpComponents& cp,
                                              const TriViewPartition& part);

/// Map CP components to latent states using the quality axis: score each mean
/// against the top eigenvector of l_hat; the two highest scores become Q=1.
/// Returns state[r] in {0..3} with state = 2q + c.
std::array<int, 4> identify_states(const std::array<Eigen::VectorXd, 4>& means,
                                   const Eigen::MatrixXd& l_hat);

/// Exhaustive 4! search for the permutation minimizing squared distance to
/// the anchor prototypes; returns perm with perm[r] = source component for
/// anchor slot r.
std::array<int, 4> align_anchors(const std::array<Eigen::VectorXd, 4>& means,
                                 const std::array<Eigen::VectorXd, 4>& anchors);

/// Pooled within-component covariance from hard nearest-mean assignment,
/// ridge 1e-6 I, with an optional single soft-EM refinement of the
/// covariance only.
MixtureModel fit_within_covariance(const ScoreMatrix& m, MixtureModel mix,
                                   bool em_refine = false);

/// Log-domain responsibilities per Bayes' rule with a shared Gaussian
/// likelihood; quality_prob sums the Q=1 states.
PosteriorResult posterior(const ScoreMatrix& m, const MixtureModel& mix);

}  // namespace care
