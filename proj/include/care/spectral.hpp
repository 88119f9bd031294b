#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "care/dataio.hpp"
#include "care/splr.hpp"

namespace care {

enum class SymmetryRule { leading, balanced, anchor };
enum class WeightMode { plain, confounder_subtracted };

/// Eigenpairs of the fitted low-rank component plus the chosen quality factor
/// and judge aggregation weights.
struct LatentFactors {
  Eigen::VectorXd eigvals;   // descending, > 1e-8
  Eigen::MatrixXd eigvecs;   // p x h, orthonormal columns
  int quality_index = -1;    // 0-based index into eigvals once set
  Eigen::VectorXd weights;   // length p once set
  int h() const { return static_cast<int>(eigvals.size()); }
};

struct AnchorSet {
  std::vector<int> items;    // row indices into the score matrix
  Eigen::VectorXd labels;    // human labels for those items
};

struct QualityEstimates {
  Eigen::VectorXd scores;
  double calib_a = 1.0;
  double calib_b = 0.0;
};

/// Statistics of the per-item average judge score on the raw scale; used to
/// put latent estimates back on a human-interpretable scale.
struct CalibTarget {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Eigen-decompose the low-rank part; keep eigenvalues above 1e-8.
LatentFactors extract_factors(const SplrDecomposition& d);

/// Select the quality factor. rule=anchor requires anchors and the
/// standardized data the anchors index into.
void break_symmetry(LatentFactors& f, SymmetryRule rule,
                    const std::optional<AnchorSet>& anchors = std::nullopt,
                    const ScoreMatrix* standardized = nullptr);

/// Compute aggregation weights from the chosen factor; sign resolved so the
/// weights sum to a nonnegative value.
void quality_weights(LatentFactors& f, WeightMode mode);

/// Per-item score w^T x / ||w||_1, optionally affinely calibrated to match
/// the mean/std of the average-judge score on the raw scale.
QualityEstimates aggregate(const ScoreMatrix& standardized,
                           const LatentFactors& f,
                           const std::optional<CalibTarget>& calib = std::nullopt);

/// Herfindahl concentration of squared loadings; lower = more balanced.
double loading_concentration(const Eigen::VectorXd& u);

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace care
