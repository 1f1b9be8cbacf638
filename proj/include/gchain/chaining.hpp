#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gchain/function_class.hpp"
#include "gchain/point_set.hpp"
#include "gchain/random.hpp"

namespace gchain {

// One cell of a partition level. Point indices are kept sorted; the
// representative is the covering center that spawned the cell and is always
// one of the cell's points.
struct PartitionCell {
  std::vector<int> points;
  int representative = 0;
  int parent = -1;  // index of the containing cell one level up, -1 at the root
};

// An increasing sequence of partitions of a finite point set. levels[0] is
// the single root cell at scale k0; levels[t] partitions at scale k0 + t,
// where every cell has diameter at most 2 * ratio^-(k0 + t). The per-point
// weights form a probability measure on the set.
struct PartitionTree {
  double ratio = 2.0;
  int k0 = 0;
  std::vector<std::vector<PartitionCell>> levels;
  std::vector<double> measure;
  PointSet points;

  int depth() const { return static_cast<int>(levels.size()); }
  int level_scale(int t) const { return k0 + t; }

  // independent re-check of every structural invariant; throws invariant_error
  void validate() const;
};

// Tail hypothesis for the process driving the chaining argument: increments
// satisfy P{X_y - X_y' > s} <= k_factor * exp(-s^2 / (2 |y - y'|^2)).
// The canonical process X_y = <gamma, y> satisfies it with k_factor 1; the
// class process X_y = sup_f <gamma, f(y)> / (sqrt(2) L) satisfies it with
// k_factor exp(R^2 / (2 L^2)).
struct SubgaussianSpec {
  enum class Kind { canonical_gaussian, class_process };
  Kind kind = Kind::canonical_gaussian;
  double k_factor = 1.0;
  std::optional<TabulatedClass> function_class;  // required for class_process
};

// Greedy farthest-point partition tree. The coarsest scale k0 is the largest
// integer with 2 * ratio^-k0 >= diam(y); each finer level covers every cell
// with balls of radius ratio^-k, ties on the farthest point going to the
// lowest index. Construction stops once every cell has zero diameter, or at
// max_depth levels (hard cap 64). The root representative is root_index.
PartitionTree build_partition_tree(const PointSet& y, double ratio, int max_depth,
                                   int root_index = 0);

// replaces the uniform weights with weights proportional to the size of each
// point's finest cell
void refit_measure_leaf_sizes(PartitionTree& tree);

// sup over points of sum_{k > k0} ratio^-k sqrt(ln(1 / mu(A_k(y))))
double chaining_functional(const PartitionTree& tree);

struct ThresholdReport {
  std::vector<double> per_point;
  double sup = 0.0;
};

// per-point deviation budgets T(y) = sum_{k > k0} xi_k(A_k(y)) with
// xi_k(A) = ratio^(-k+1) sqrt(8 ln(2^(k-k0) k_factor / (mu(A) delta))); the
// simultaneous event {exists y : X_y - X_y0 > T(y)} has probability < delta
ThresholdReport claim9_thresholds(const PartitionTree& tree, double k_factor,
                                  double delta);

// simulates the process and returns the frequency of the simultaneous
// exceedance event over the given trials
double empirical_claim9_check(const PointSet& y, const SubgaussianSpec& spec,
                              const PartitionTree& tree, double delta,
                              std::int64_t trials, GaussianStream stream);

// fully explicit upper bound on E[sup_y X_y - X_y0] for any process passing
// the tail hypothesis: integrates the per-delta threshold sup over delta with
// a closed-form cap on the head below the smallest grid value and a
// left-endpoint rule on a geometric grid from 1e-6 to 1
double explicit_esup_bound(const PartitionTree& tree, double k_factor,
                           int quadrature_points);

// greedy farthest-point covering count, first center at index 0
int covering_number(const PointSet& y, double eps);

// sum_j (eps_j - eps_{j+1}) sqrt(ln N(y, eps_{j+1})) over a decreasing grid
double dudley_integral(const PointSet& y, const std::vector<double>& eps_grid);

std::string tree_to_json(const PartitionTree& tree);
PartitionTree tree_from_json(const std::string& text);

}  // namespace gchain
