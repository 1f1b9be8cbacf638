#include "gchain/gaussian_average.hpp"

#include <cmath>
#include <limits>

namespace gchain {

McEstimate estimate_gaussian_average(const PointSet& y, std::int64_t budget,
                                     GaussianStream stream) {
  y.validate();
  if (budget < 2) throw invariant_error("estimate_gaussian_average: budget must be >= 2");

  const std::size_t n = y.points.size();
  const int d = y.dim;

  // differences against the first point, flat row-major
  std::vector<double> diffs(n * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      diffs[i * d + c] = y.points[i][c] - y.points[0][c];

  std::vector<double> gamma(d);
  RunningMoments acc;
  for (std::int64_t k = 0; k < budget; ++k) {
    stream.fill_normal(static_cast<std::uint64_t>(k), gamma);
    double best = 0.0;  // row 0 is identically zero
    for (std::size_t i = 1; i < n; ++i) {
      double s = 0.0;
      const double* row = diffs.data() + i * d;
      for (int c = 0; c < d; ++c) s += row[c] * gamma[c];
      if (s > best) best = s;
    }
    acc.add(best);
  }

  McEstimate out;
  out.value = acc.mean;
  out.std_error = acc.std_error();
  out.samples = static_cast<std::uint64_t>(budget);
  out.seed = stream.seed;
  out.stream_id = stream.stream_id;
  return out;
}

std::vector<TailCheckRow> concentration_tail_check(const PointSet& y,
                                                   const std::vector<double>& s_grid,
                                                   std::int64_t trials,
                                                   GaussianStream stream) {
  y.validate();
  if (trials < 1000) throw invariant_error("concentration_tail_check: trials must be >= 1000");
  if (s_grid.empty()) throw invariant_error("concentration_tail_check: s grid is empty");
  for (double s : s_grid)
    if (!(s >= 0.0)) throw invariant_error("concentration_tail_check: s values must be >= 0");

  const std::size_t n = y.points.size();
  const int d = y.dim;

  double max_sq_norm = 0.0;
  for (const auto& p : y.points) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += p[c] * p[c];
    if (s > max_sq_norm) max_sq_norm = s;
  }

  std::vector<double> stats(static_cast<std::size_t>(trials));
  std::vector<double> gamma(d);
  RunningMoments acc;
  for (std::int64_t k = 0; k < trials; ++k) {
    stream.fill_normal(static_cast<std::uint64_t>(k), gamma);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int c = 0; c < d; ++c) s += y.points[i][c] * gamma[c];
      if (s > best) best = s;
    }
    stats[static_cast<std::size_t>(k)] = best;
    acc.add(best);
  }
  const double mean = acc.mean;

  std::vector<TailCheckRow> rows;
  rows.reserve(s_grid.size());
  for (double s : s_grid) {
    TailCheckRow row;
    row.s = s;
    std::int64_t count = 0;
    for (double v : stats)
      if (v > mean + s) ++count;
    row.frequency = static_cast<double>(count) / static_cast<double>(trials);
    if (max_sq_norm == 0.0)
      row.bound = (s == 0.0) ? 1.0 : 0.0;
    else
      row.bound = std::exp(-(s * s) / (2.0 * max_sq_norm));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace gchain
