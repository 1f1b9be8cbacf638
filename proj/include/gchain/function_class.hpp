#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gchain/point_set.hpp"
#include "gchain/random.hpp"

namespace gchain {

// Finite function class given by a value table: values[m][i] is the image of
// bound_points.points[i] under member m.  Member order matters: the first
// member anchors control variates in the estimators, so comparisons between
// classes sharing their first member hold sample by sample.
struct TabulatedClass {
  int in_dim = 0;
  int out_dim = 0;
  PointSet bound_points;
  std::vector<std::vector<Eigen::VectorXd>> values;  // [member][point]

  std::size_t size() const { return values.size(); }
  void validate() const;
};

// Ball of radius ball_radius in the rkhs of an rbf kernel, applied blockwise:
// an input is stack_count blocks, every block goes through the same ball
// member, and the output collects one coordinate per block.
struct KernelBallClass {
  double kernel_width = 1.0;
  double ball_radius = 1.0;
  int stack_count = 1;
  // optional replacement kernel on blocks; must be positive semidefinite
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> kernel;

  double eval_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  void validate() const;
};

struct LipschitzMap {
  std::string description;
  double lip_bound = 0.0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> action;
};

// index of an exact coordinate match in ps, -1 if absent
int find_point_index(const PointSet& ps, const Eigen::VectorXd& p);

// { f(y) : f in F, y in Y } in member-major order, labels "m<f>@p<i>".
PointSet image_set(const TabulatedClass& f, const PointSet& y);

// Exact largest ratio |f(y)-f(y')| / |y-y'| over members and distinct pairs.
double lipschitz_constant(const TabulatedClass& f, const PointSet& y);
// Over the whole ambient space the rbf ball constant is radius / width.
double ambient_lipschitz_constant(const KernelBallClass& f);
// On a finite set the ball supremum per pair is the gram operator norm.
double lipschitz_constant(const KernelBallClass& f, const PointSet& y);

// { (f(y) - f(y')) / |y - y'| : f in F } for one ordered pair of distinct
// points.
PointSet quotient_set(const TabulatedClass& f, const Eigen::VectorXd& a,
                      const Eigen::VectorXd& b);

struct PairTerm {
  int i = 0;
  int j = 0;
  double distance = 0.0;
  McEstimate term;
};

// Per-pair estimates of E sup_f <gamma, f(y)-f(y')> / |y-y'|, ordered pairs,
// all sharing the same draws.  Each term is computed literally as
// estimate_gaussian_average over the pair's quotient set, so the two agree
// bit-for-bit under a shared stream.
std::vector<PairTerm> quotient_pair_terms(const TabulatedClass& f, const PointSet& y,
                                          std::int64_t budget, GaussianStream stream);

// Largest pair term; the returned estimate is the winning pair's.
McEstimate estimate_quotient_average(const TabulatedClass& f, const PointSet& y,
                                     std::int64_t budget, GaussianStream stream);
// Kernel ball version: the inner supremum has the closed form
// radius * sqrt(gamma' M gamma) with M the pair gram matrix.
McEstimate estimate_quotient_average(const KernelBallClass& f, const PointSet& y,
                                     std::int64_t budget, GaussianStream stream);

// One convex combination of the members, accumulated around the first member
// so combinations of identical members reproduce them exactly.
std::vector<Eigen::VectorXd> convex_combination(const TabulatedClass& f,
                                                const std::vector<double>& weights);
// Appends `combos` random convex combinations; weights are normalized
// exponentials drawn from the stream.
TabulatedClass convex_closure_sample(const TabulatedClass& f, int combos,
                                     GaussianStream stream);

// Result of composing a tabulated class with a pointwise map.
struct ComposedClass {
  TabulatedClass on_inputs;  // tabulates f . phi on the inputs z
  PointSet mapped_inputs;    // phi(z), so both sides of the contraction
                             // inequality can be estimated
};

// Tabulates f . phi on z; phi must send z onto points where f is tabulated.
ComposedClass precompose(const TabulatedClass& f, const LipschitzMap& phi,
                         const PointSet& z);

TabulatedClass scale_class(const TabulatedClass& f, double c);

// Minkowski sums {f + h}; both classes must share their bound points.  Member
// order is f-major, so the combined first member is first+first and anchors
// stay aligned.
TabulatedClass sum_class(const TabulatedClass& f, const TabulatedClass& h);

TabulatedClass restrict_class(const TabulatedClass& f, const std::vector<int>& point_idx);

// ---- stacked view (independent member choice per coordinate block) --------

// blocks[p][t] indexes the base bound point seen by task t in stacked point p
struct StackedPattern {
  std::vector<std::vector<int>> blocks;
};

PointSet stack_points(const PointSet& base, int tasks, const StackedPattern& pattern);

// Explicit product class on the stacked points; refuses to materialize more
// than 32768 members.
TabulatedClass stack_class(const TabulatedClass& f, int tasks, const StackedPattern& pattern);

// Same quantities without materializing size^tasks members: the per-sample
// supremum over member tuples splits into a sum of per-block maxima.
McEstimate stacked_quotient_average(const TabulatedClass& f, int tasks,
                                    const StackedPattern& pattern, std::int64_t budget,
                                    GaussianStream stream);
double stacked_lipschitz_constant(const TabulatedClass& f, int tasks,
                                  const StackedPattern& pattern);

namespace detail {
// Symmetrizes in place and rejects matrices with an eigenvalue below -1e-8.
// Returns the largest eigenvalue clamped at zero.
double check_psd(Eigen::MatrixXd& gram, const char* what);
}

}  // namespace gchain
