#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "gchain/errors.hpp"

namespace gchain {

// Finite list of points in R^dim.  Duplicates are allowed and order matters:
// several estimators anchor their control variate at the first point.
struct PointSet {
  int dim = 0;
  std::vector<Eigen::VectorXd> points;
  std::vector<std::string> labels;  // empty, or one label per point

  std::size_t size() const { return points.size(); }
  void validate() const;
};

// Largest pairwise distance; exact O(N^2) scan, 0 for a singleton.
double diameter(const PointSet& y);

// Plain sequential accumulation, so results are reproducible run to run and
// scale exactly under power-of-two scalings of the inputs.
double squared_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
double dot(const Eigen::VectorXd& a, const double* gamma);

}  // namespace gchain
