#pragma once

#include <cstdint>
#include <vector>

#include "gchain/point_set.hpp"
#include "gchain/random.hpp"

namespace gchain {

// Monte Carlo estimate of E sup_{y in Y} <gamma, y> for standard normal gamma.
//
// Each sample evaluates sup_y <gamma, y - y_ref> with y_ref the first point of
// Y.  Subtracting <gamma, y_ref> leaves the mean unchanged (a control
// variate), makes a singleton estimate exactly 0, and makes the estimate
// invariant under translating the whole set.  The per-sample statistic is
// monotone in Y whenever two sets share the same first point, so subset
// comparisons hold sample by sample.
McEstimate estimate_gaussian_average(const PointSet& y, std::int64_t budget,
                                     GaussianStream stream);

struct TailCheckRow {
  double s = 0.0;
  double frequency = 0.0;  // empirical P{ sup_y <gamma,y> > mean + s }
  double bound = 0.0;      // exp(-s^2 / (2 max_y |y|^2))
};

// Empirical concentration check for gamma -> sup_y <gamma, y>, which is
// Lipschitz in gamma with constant max_y |y|.  The same trials feed the
// empirical mean and the exceedance counts.
std::vector<TailCheckRow> concentration_tail_check(const PointSet& y,
                                                   const std::vector<double>& s_grid,
                                                   std::int64_t trials,
                                                   GaussianStream stream);

}  // namespace gchain
