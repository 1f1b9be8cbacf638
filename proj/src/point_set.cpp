#include "gchain/point_set.hpp"

#include <algorithm>
#include <cmath>

namespace gchain {

void PointSet::validate() const {
  if (dim <= 0) throw invariant_error("point set: dim must be positive");
  if (points.empty()) throw invariant_error("point set: at least one point required");
  for (const auto& p : points)
    if (p.size() != dim) throw invariant_error("point set: point dimension mismatch");
  if (!labels.empty() && labels.size() != points.size())
    throw invariant_error("point set: label count mismatch");
}

double squared_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double dot(const Eigen::VectorXd& a, const double* gamma) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += a[i] * gamma[i];
  return s;
}

double diameter(const PointSet& y) {
  y.validate();
  double best = 0.0;
  for (std::size_t i = 0; i + 1 < y.points.size(); ++i)
    for (std::size_t j = i + 1; j < y.points.size(); ++j)
      best = std::max(best, squared_distance(y.points[i], y.points[j]));
  return std::sqrt(best);
}

}  // namespace gchain
