#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace care {

/// Three disjoint judge groups with the absolute sparse-edge mass crossing
/// group boundaries. feasible means no cross-group entry of |S| exceeds eps.
struct TriViewPartition {
  std::array<std::vector<int>, 3> groups;
  double eps = 1e-3;
  double cross_mass = 0.0;
  bool feasible = false;
};

/// Sum of |s(i,j)| over pairs (i,j) in different groups.
double cross_mass_of(const std::array<std::vector<int>, 3>& groups,
                     const Eigen::MatrixXd& s);

/// Split p judges into three groups using the sparse structure of s.
/// If the eps-thresholded graph has >= 3 connected components, components are
/// merged into three groups balancing sizes and the result is feasible.
/// Otherwise a multi-restart local search minimizes cross mass under a
/// min-group-size constraint of max(1, p/6).
TriViewPartition make_partition(const Eigen::MatrixXd& s, double eps,
                                std::uint64_t seed, int restarts = 32);

/// Recompute cross mass/feasibility; throws if the stored values disagree.
void verify(const TriViewPartition& part, const Eigen::MatrixXd& s);

/// Exhaustive minimum cross mass over all 3-partitions obeying the same
/// balance constraint. Only sensible for p <= ~12.
double brute_force_cross_mass(const Eigen::MatrixXd& s);

}  // namespace care
