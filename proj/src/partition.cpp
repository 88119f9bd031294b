#include "care/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace care {

namespace {

int min_group_size(int p) { return std::max(1, p / 6); }

double cross_mass_assign(const std::vector<int>& assign,
                         const Eigen::MatrixXd& s) {
  const int p = static_cast<int>(assign.size());
  double m = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (assign[i] != assign[j]) m += std::abs(s(i, j));
  return m;
}

std::array<std::vector<int>, 3> groups_from_assign(const std::vector<int>& assign) {
  std::array<std::vector<int>, 3> g;
  for (size_t i = 0; i < assign.size(); ++i)
    g[assign[i]].push_back(static_cast<int>(i));
  return g;
}

// Canonical relabeling so equivalent partitions compare equal: groups ordered
// by their smallest member.
std::vector<int> canonical(const std::vector<int>& assign) {
  std::vector<int> map(3, -1);
  int next = 0;
  std::vector<int> out(assign.size());
  for (size_t i = 0; i < assign.size(); ++i) {
    if (map[assign[i]] < 0) map[assign[i]] = next++;
    out[i] = map[assign[i]];
  }
  return out;
}

bool balanced(const std::vector<int>& assign, int p) {
  int cnt[3] = {0, 0, 0};
  for (int a : assign) ++cnt[a];
  const int mg = min_group_size(p);
  return cnt[0] >= mg && cnt[1] >= mg && cnt[2] >= mg;
}

}  // namespace

double cross_mass_of(const std::array<std::vector<int>, 3>& groups,
                     const Eigen::MatrixXd& s) {
  const int p = static_cast<int>(s.rows());
  std::vector<int> assign(p, -1);
  for (int g = 0; g < 3; ++g)
    for (int j : groups[g]) assign[j] = g;
  for (int a : assign)
    if (a < 0) throw std::invalid_argument("partition does not cover all judges");
  return cross_mass_assign(assign, s);
}

TriViewPartition make_partition(const Eigen::MatrixXd& s, double eps,
                                std::uint64_t seed, int restarts) {
  const int p = static_cast<int>(s.rows());
  if (p < 3) throw std::invalid_argument("partition requires p >= 3");

  // Connected components of the eps-thresholded off-diagonal graph.
  std::vector<int> comp(p, -1);
  int ncomp = 0;
  for (int i = 0; i < p; ++i) {
    if (comp[i] >= 0) continue;
    std::vector<int> stack{i};
    comp[i] = ncomp;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < p; ++v) {
        if (v == u || comp[v] >= 0) continue;
        if (std::abs(s(u, v)) > eps) {
          comp[v] = ncomp;
          stack.push_back(v);
        }
      }
    }
    ++ncomp;
  }

  TriViewPartition part;
  part.eps = eps;

  if (ncomp >= 3) {
    // Merge components into 3 groups, repeatedly assigning the largest
    // remaining component to the currently smallest group.
    std::vector<std::vector<int>> comps(ncomp);
    for (int i = 0; i < p; ++i) comps[comp[i]].push_back(i);
    std::sort(comps.begin(), comps.end(),
              [](const auto& a, const auto& b) { return a.size() > b.size(); });
    for (const auto& c : comps) {
      int g = 0;
      for (int k = 1; k < 3; ++k)
        if (part.groups[k].size() < part.groups[g].size()) g = k;
      part.groups[g].insert(part.groups[g].end(), c.begin(), c.end());
    }
    for (auto& g : part.groups) std::sort(g.begin(), g.end());
    part.cross_mass = cross_mass_of(part.groups, s);
    part.feasible = true;
    return part;
  }

  // Local search: multi-restart move-based minimization of cross mass under
  // the balance constraint, deterministic winner by (mass, assignment).
  std::vector<int> best_assign;
  double best_mass = std::numeric_limits<double>::infinity();
  const int mg = min_group_size(p);

  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + r);
    std::vector<int> assign(p);
    for (int i = 0; i < p; ++i) assign[i] = i % 3;
    std::shuffle(assign.begin(), assign.end(), rng);

    double mass = cross_mass_assign(assign, s);
    bool improved = true;
    while (improved) {
      improved = false;
      // Single moves.
      for (int i = 0; i < p; ++i) {
        const int old = assign[i];
        int cnt = 0;
        for (int a : assign) cnt += (a == old);
        for (int g = 0; g < 3; ++g) {
          if (g == old) continue;
          if (cnt - 1 < mg) continue;
          assign[i] = g;
          const double m2 = cross_mass_assign(assign, s);
          if (m2 + 1e-15 < mass) {
            mass = m2;
            improved = true;
            break;
          }
          assign[i] = old;
        }
      }
      // Pairwise swaps.
      for (int i = 0; i < p && !improved; ++i)
        for (int j = i + 1; j < p && !improved; ++j) {
          if (assign[i] == assign[j]) continue;
          std::swap(assign[i], assign[j]);
          const double m2 = cross_mass_assign(assign, s);
          if (m2 + 1e-15 < mass) {
            mass = m2;
            improved = true;
          } else {
            std::swap(assign[i], assign[j]);
          }
        }
    }

    std::vector<int> canon = canonical(assign);
    if (mass < best_mass - 1e-15 ||
        (std::abs(mass - best_mass) <= 1e-15 &&
         (best_assign.empty() || canon < best_assign))) {
      best_mass = mass;
      best_assign = canon;
    }
  }

  part.groups = groups_from_assign(best_assign);
  part.cross_mass = best_mass;
  double max_cross = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (best_assign[i] != best_assign[j])
        max_cross = std::max(max_cross, std::abs(s(i, j)));
  part.feasible = max_cross <= eps;
  return part;
}

void verify(const TriViewPartition& part, const Eigen::MatrixXd& s) {
  const int p = static_cast<int>(s.rows());
  std::vector<int> assign(p, -1);
  size_t total = 0;
  for (int g = 0; g < 3; ++g) {
    if (part.groups[g].empty()) throw std::runtime_error("empty group");
    total += part.groups[g].size();
    for (int j : part.groups[g]) {
      if (j < 0 || j >= p || assign[j] >= 0)
        throw std::runtime_error("partition groups overlap or exceed range");
      assign[j] = g;
    }
  }
  if (total != static_cast<size_t>(p))
    throw std::runtime_error("partition does not cover all judges");

  const double mass = cross_mass_assign(assign, s);
  double max_cross = 0.0;
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (assign[i] != assign[j])
        max_cross = std::max(max_cross, std::abs(s(i, j)));
  const bool feas = max_cross <= part.eps;
  if (std::abs(mass - part.cross_mass) > 1e-9 || feas != part.feasible)
    throw std::runtime_error("stored partition stats disagree with recompute");
}

double brute_force_cross_mass(const Eigen::MatrixXd& s) {
  const int p = static_cast<int>(s.rows());
  if (p < 3 || p > 12)
    throw std::invalid_argument("brute force limited to 3 <= p <= 12");
  std::vector<int> assign(p, 0);
  double best = std::numeric_limits<double>::infinity();
  const long total = static_cast<long>(std::pow(3.0, p));
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < p; ++i) {
      assign[i] = static_cast<int>(c % 3);
      c /= 3;
    }
    if (!balanced(assign, p)) continue;
    best = std::min(best, cross_mass_assign(assign, s));
  }
  return best;
}

}  // namespace care
