#include "gchain/chaining.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "gchain/errors.hpp"

namespace gchain {

namespace {

double cell_diameter(const PointSet& ps, const std::vector<int>& cell) {
  double best = 0.0;
  for (std::size_t a = 0; a < cell.size(); ++a)
    for (std::size_t b = a + 1; b < cell.size(); ++b) {
      const double d = std::sqrt(squared_distance(ps.points[cell[a]], ps.points[cell[b]]));
      if (d > best) best = d;
    }
  return best;
}

bool zero_diameter_level(const PointSet& ps, const std::vector<PartitionCell>& level) {
  for (const auto& cell : level)
    if (cell_diameter(ps, cell.points) > 0.0) return false;
  return true;
}

// point index -> cell index, one row per level
std::vector<std::vector<int>> point_cell_map(const PartitionTree& tree) {
  const int n = static_cast<int>(tree.points.size());
  std::vector<std::vector<int>> map(tree.levels.size(), std::vector<int>(n, -1));
  for (std::size_t t = 0; t < tree.levels.size(); ++t)
    for (std::size_t c = 0; c < tree.levels[t].size(); ++c)
      for (int p : tree.levels[t][c].points) map[t][p] = static_cast<int>(c);
  return map;
}

std::vector<std::vector<double>> cell_measures(const PartitionTree& tree) {
  std::vector<std::vector<double>> mu(tree.levels.size());
  for (std::size_t t = 0; t < tree.levels.size(); ++t) {
    mu[t].reserve(tree.levels[t].size());
    for (const auto& cell : tree.levels[t]) {
      double m = 0.0;
      for (int p : cell.points) m += tree.measure[p];
      mu[t].push_back(m);
    }
  }
  return mu;
}

// greedy farthest-point covering of one cell with balls of radius rho;
// the first center is the cell's current representative, later centers are
// the farthest uncovered point, ties to the lowest point index
std::vector<PartitionCell> cover_cell(const PointSet& ps, const PartitionCell& cell,
                                      int cell_index, double rho) {
  const auto& pts = cell.points;
  std::vector<double> best_dist(pts.size());
  std::vector<int> best_center(pts.size(), cell.representative);
  for (std::size_t i = 0; i < pts.size(); ++i)
    best_dist[i] = std::sqrt(
        squared_distance(ps.points[pts[i]], ps.points[cell.representative]));

  std::vector<int> centers{cell.representative};
  for (;;) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (best_dist[i] > best_dist[far]) far = i;
    if (best_dist[far] <= rho) break;
    const int c = pts[far];
    centers.push_back(c);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double d = std::sqrt(squared_distance(ps.points[pts[i]], ps.points[c]));
      if (d < best_dist[i]) {
        best_dist[i] = d;
        best_center[i] = c;
      }
    }
  }

  std::vector<PartitionCell> out;
  out.reserve(centers.size());
  for (int c : centers) {
    PartitionCell sub;
    sub.representative = c;
    sub.parent = cell_index;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (best_center[i] == c) sub.points.push_back(pts[i]);
    std::sort(sub.points.begin(), sub.points.end());
    out.push_back(std::move(sub));
  }
  return out;
}

}  // namespace

void PartitionTree::validate() const {
  points.validate();
  const int n = static_cast<int>(points.size());
  if (ratio < 2.0) throw invariant_error("partition tree: ratio must be >= 2");
  if (levels.empty()) throw invariant_error("partition tree: no levels");
  if (static_cast<int>(measure.size()) != n)
    throw invariant_error("partition tree: measure size mismatch");
  double total = 0.0;
  for (double m : measure) {
    if (!(m >= 0.0)) throw invariant_error("partition tree: negative weight");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw invariant_error("partition tree: weights do not sum to 1");

  if (levels[0].size() != 1)
    throw invariant_error("partition tree: root level must hold one cell");

  const double d = diameter(points);
  if (d > 0.0) {
    if (!(2.0 * std::pow(ratio, static_cast<double>(-k0)) >= d))
      throw invariant_error("partition tree: root scale too fine for the diameter");
    if (2.0 * std::pow(ratio, static_cast<double>(-(k0 + 1))) >= d)
      throw invariant_error("partition tree: root scale is not the largest admissible");
  }

  for (std::size_t t = 0; t < levels.size(); ++t) {
    std::vector<char> seen(n, 0);
    const double limit = 2.0 * std::pow(ratio, static_cast<double>(-(k0 + static_cast<int>(t))));
    for (const auto& cell : levels[t]) {
      if (cell.points.empty()) throw invariant_error("partition tree: empty cell");
      double mu = 0.0;
      for (int p : cell.points) {
        if (p < 0 || p >= n) throw invariant_error("partition tree: point index out of range");
        if (seen[p]) throw invariant_error("partition tree: point in two cells");
        seen[p] = 1;
        mu += measure[p];
      }
      if (!(mu > 0.0)) throw invariant_error("partition tree: cell with zero measure");
      if (!std::is_sorted(cell.points.begin(), cell.points.end()))
        throw invariant_error("partition tree: cell points not sorted");
      if (!std::binary_search(cell.points.begin(), cell.points.end(), cell.representative))
        throw invariant_error("partition tree: representative outside its cell");
      if (t > 0) {
        if (cell.parent < 0 || cell.parent >= static_cast<int>(levels[t - 1].size()))
          throw invariant_error("partition tree: bad parent index");
        const auto& par = levels[t - 1][cell.parent].points;
        if (!std::includes(par.begin(), par.end(), cell.points.begin(), cell.points.end()))
          throw invariant_error("partition tree: cell not contained in its parent");
        if (cell_diameter(points, cell.points) > limit * (1.0 + 1e-12))
          throw invariant_error("partition tree: cell diameter exceeds its scale");
      } else if (cell.parent != -1) {
        throw invariant_error("partition tree: root cell must have no parent");
      }
    }
    for (int p = 0; p < n; ++p)
      if (!seen[p]) throw invariant_error("partition tree: point missing from a level");
  }
}

PartitionTree build_partition_tree(const PointSet& y, double ratio, int max_depth,
                                   int root_index) {
  y.validate();
  if (ratio < 2.0) throw invariant_error("build_partition_tree: ratio must be >= 2");
  if (max_depth < 1) throw invariant_error("build_partition_tree: max_depth must be positive");
  const int n = static_cast<int>(y.size());
  if (root_index < 0 || root_index >= n)
    throw invariant_error("build_partition_tree: root index out of range");

  PartitionTree tree;
  tree.ratio = ratio;
  tree.points = y;
  tree.measure.assign(n, 1.0 / static_cast<double>(n));

  PartitionCell root;
  root.points.resize(n);
  std::iota(root.points.begin(), root.points.end(), 0);
  root.representative = root_index;
  root.parent = -1;

  const double d = diameter(y);
  if (d > 0.0) {
    // largest integer k with 2 r^-k >= d, settled by the same floating point
    // predicate the validator re-checks
    int k = static_cast<int>(std::floor(std::log(2.0 / d) / std::log(ratio)));
    while (2.0 * std::pow(ratio, static_cast<double>(-(k + 1))) >= d) ++k;
    while (2.0 * std::pow(ratio, static_cast<double>(-k)) < d) --k;
    tree.k0 = k;
  }

  tree.levels.push_back({root});

  const int cap = std::min(max_depth, 64);
  while (tree.depth() < cap && !zero_diameter_level(y, tree.levels.back())) {
    const int scale = tree.k0 + tree.depth();
    const double rho = std::pow(ratio, static_cast<double>(-scale));
    std::vector<PartitionCell> next;
    const auto& prev = tree.levels.back();
    for (std::size_t c = 0; c < prev.size(); ++c) {
      auto split = cover_cell(y, prev[c], static_cast<int>(c), rho);
      for (auto& cell : split) next.push_back(std::move(cell));
    }
    tree.levels.push_back(std::move(next));
  }

  tree.validate();
  return tree;
}

void refit_measure_leaf_sizes(PartitionTree& tree) {
  tree.validate();
  const int n = static_cast<int>(tree.points.size());
  std::vector<double> leaf(n, 0.0);
  for (const auto& cell : tree.levels.back())
    for (int p : cell.points) leaf[p] = static_cast<double>(cell.points.size());
  const double total = std::accumulate(leaf.begin(), leaf.end(), 0.0);
  for (int p = 0; p < n; ++p) tree.measure[p] = leaf[p] / total;
}

double chaining_functional(const PartitionTree& tree) {
  tree.validate();
  const auto map = point_cell_map(tree);
  const auto mu = cell_measures(tree);
  double sup = 0.0;
  for (std::size_t p = 0; p < tree.points.size(); ++p) {
    double sum = 0.0;
    for (int t = 1; t < tree.depth(); ++t) {
      const double m = mu[t][map[t][p]];
      const double w = std::pow(tree.ratio, static_cast<double>(-(tree.k0 + t)));
      sum += w * std::sqrt(std::max(0.0, std::log(1.0 / m)));
    }
    if (sum > sup) sup = sum;
  }
  return sup;
}

ThresholdReport claim9_thresholds(const PartitionTree& tree, double k_factor,
                                  double delta) {
  tree.validate();
  if (k_factor < 1.0) throw invariant_error("claim9_thresholds: tail prefactor must be >= 1");
  if (!(delta > 0.0 && delta < 1.0))
    throw invariant_error("claim9_thresholds: delta must lie in (0,1)");
  const auto map = point_cell_map(tree);
  const auto mu = cell_measures(tree);
  ThresholdReport rep;
  rep.per_point.resize(tree.points.size(), 0.0);
  for (std::size_t p = 0; p < tree.points.size(); ++p) {
    double sum = 0.0;
    for (int t = 1; t < tree.depth(); ++t) {
      const double m = mu[t][map[t][p]];
      const double w = std::pow(tree.ratio, static_cast<double>(-(tree.k0 + t) + 1));
      const double arg = std::pow(2.0, static_cast<double>(t)) * k_factor / (m * delta);
      sum += w * std::sqrt(8.0 * std::log(arg));
    }
    rep.per_point[p] = sum;
    if (sum > rep.sup) rep.sup = sum;
  }
  return rep;
}

double empirical_claim9_check(const PointSet& y, const SubgaussianSpec& spec,
                              const PartitionTree& tree, double delta,
                              std::int64_t trials, GaussianStream stream) {
  tree.validate();
  y.validate();
  if (y.dim != tree.points.dim || y.points != tree.points.points)
    throw invariant_error("empirical_claim9_check: point set does not match the tree");
  if (trials < 1) throw invariant_error("empirical_claim9_check: trials must be positive");
  if (!zero_diameter_level(tree.points, tree.levels.back()))
    throw invariant_error(
        "empirical_claim9_check: tree must be refined until cells have zero "
        "diameter, or the telescoping argument does not close");

  const auto thresholds = claim9_thresholds(tree, spec.k_factor, delta);
  const int n = static_cast<int>(y.size());
  const int y0 = tree.levels[0][0].representative;

  int gamma_dim = y.dim;
  std::vector<Eigen::VectorXd> rows;  // member-major values for the class process
  int members = 0;
  double scale = 1.0;
  if (spec.kind == SubgaussianSpec::Kind::class_process) {
    if (!spec.function_class)
      throw invariant_error("empirical_claim9_check: class process needs a function class");
    const auto& f = *spec.function_class;
    const double lip = lipschitz_constant(f, y);
    if (lip <= 0.0)
      throw invariant_error("empirical_claim9_check: class process needs a nonzero Lipschitz constant");
    rows = image_set(f, y).points;
    members = static_cast<int>(f.size());
    gamma_dim = f.out_dim;
    scale = 1.0 / (std::sqrt(2.0) * lip);
  }

  std::vector<double> gamma(gamma_dim);
  std::vector<double> x(n);
  std::int64_t exceed = 0;
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    stream.fill_normal(static_cast<std::uint64_t>(trial), gamma);
    if (spec.kind == SubgaussianSpec::Kind::canonical_gaussian) {
      for (int i = 0; i < n; ++i) x[i] = dot(y.points[i], gamma.data());
    } else {
      for (int i = 0; i < n; ++i) {
        double best = dot(rows[i], gamma.data());
        for (int m = 1; m < members; ++m) {
          const double s = dot(rows[m * n + i], gamma.data());
          if (s > best) best = s;
        }
        x[i] = scale * best;
      }
    }
    for (int i = 0; i < n; ++i)
      if (x[i] - x[y0] > thresholds.per_point[i]) {
        ++exceed;
        break;
      }
  }
  return static_cast<double>(exceed) / static_cast<double>(trials);
}

double explicit_esup_bound(const PartitionTree& tree, double k_factor,
                           int quadrature_points) {
  tree.validate();
  if (k_factor < 1.0) throw invariant_error("explicit_esup_bound: tail prefactor must be >= 1");
  if (quadrature_points < 8)
    throw invariant_error("explicit_esup_bound: need at least 8 quadrature points");
  if (!zero_diameter_level(tree.points, tree.levels.back()))
    throw invariant_error(
        "explicit_esup_bound: tree must be refined until cells have zero diameter");
  if (tree.depth() < 2) return 0.0;

  // the threshold sup is decreasing in delta, so a left endpoint rule on the
  // body overestimates the integral; the head below the smallest grid point
  // uses sup_y T(y, delta) <= T0 + sqrt(8) S sqrt(ln(1/delta)) and the closed
  // form of the remaining integral
  const double delta0 = 1e-6;
  const int m = quadrature_points;
  double body = 0.0;
  double prev = delta0;
  double t_prev = claim9_thresholds(tree, k_factor, delta0).sup;
  for (int j = 1; j <= m; ++j) {
    const double next = std::exp(std::log(delta0) * (1.0 - static_cast<double>(j) / m));
    body += (next - prev) * t_prev;
    if (j < m) t_prev = claim9_thresholds(tree, k_factor, next).sup;
    prev = next;
  }

  double s_sum = 0.0;
  for (int t = 1; t < tree.depth(); ++t)
    s_sum += std::pow(tree.ratio, static_cast<double>(-(tree.k0 + t) + 1));
  const double t0 = claim9_thresholds(tree, k_factor, 1.0 - 1e-15).sup;
  const double u0 = std::sqrt(std::log(1.0 / delta0));
  const double root_pi = std::sqrt(3.14159265358979323846);
  const double head = delta0 * t0 +
                      std::sqrt(8.0) * s_sum *
                          (delta0 * u0 + 0.5 * root_pi * std::erfc(u0));
  return head + body;
}

int covering_number(const PointSet& y, double eps) {
  y.validate();
  if (!(eps > 0.0)) throw invariant_error("covering_number: radius must be positive");
  const int n = static_cast<int>(y.size());
  std::vector<double> best(n);
  for (int i = 0; i < n; ++i)
    best[i] = std::sqrt(squared_distance(y.points[i], y.points[0]));
  int count = 1;
  for (;;) {
    int far = 0;
    for (int i = 1; i < n; ++i)
      if (best[i] > best[far]) far = i;
    if (best[far] <= eps) break;
    ++count;
    for (int i = 0; i < n; ++i)
      best[i] = std::min(best[i], std::sqrt(squared_distance(y.points[i], y.points[far])));
  }
  return count;
}

double dudley_integral(const PointSet& y, const std::vector<double>& eps_grid) {
  y.validate();
  if (eps_grid.empty()) throw invariant_error("dudley_integral: empty grid");
  for (std::size_t j = 0; j < eps_grid.size(); ++j) {
    if (!(eps_grid[j] > 0.0)) throw invariant_error("dudley_integral: radii must be positive");
    if (j > 0 && !(eps_grid[j] < eps_grid[j - 1]))
      throw invariant_error("dudley_integral: grid must decrease strictly");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j + 1 < eps_grid.size(); ++j) {
    const int cover = covering_number(y, eps_grid[j + 1]);
    sum += (eps_grid[j] - eps_grid[j + 1]) * std::sqrt(std::log(static_cast<double>(cover)));
  }
  return sum;
}

std::string tree_to_json(const PartitionTree& tree) {
  nlohmann::ordered_json root;
  root["ratio"] = tree.ratio;
  root["k0"] = tree.k0;
  root["dim"] = tree.points.dim;
  auto& pts = root["points"] = nlohmann::ordered_json::array();
  for (const auto& p : tree.points.points) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int c = 0; c < p.size(); ++c) row.push_back(p[c]);
    pts.push_back(std::move(row));
  }
  if (!tree.points.labels.empty()) root["labels"] = tree.points.labels;
  root["measure"] = tree.measure;
  auto& levels = root["levels"] = nlohmann::ordered_json::array();
  for (const auto& level : tree.levels) {
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& cell : level) {
      nlohmann::ordered_json c;
      c["points"] = cell.points;
      c["representative"] = cell.representative;
      c["parent"] = cell.parent;
      cells.push_back(std::move(c));
    }
    levels.push_back(std::move(cells));
  }
  return root.dump(2);
}

PartitionTree tree_from_json(const std::string& text) {
  nlohmann::ordered_json root;
  try {
    root = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("partition tree json: ") + e.what());
  }
  PartitionTree tree;
  try {
    tree.ratio = root.at("ratio").get<double>();
    tree.k0 = root.at("k0").get<int>();
    tree.points.dim = root.at("dim").get<int>();
    for (const auto& row : root.at("points")) {
      Eigen::VectorXd p(tree.points.dim);
      if (static_cast<int>(row.size()) != tree.points.dim)
        throw parse_error("partition tree json: point with wrong dimension");
      for (int c = 0; c < tree.points.dim; ++c) p[c] = row.at(c).get<double>();
      tree.points.points.push_back(std::move(p));
    }
    if (root.contains("labels"))
      tree.points.labels = root.at("labels").get<std::vector<std::string>>();
    tree.measure = root.at("measure").get<std::vector<double>>();
    for (const auto& level : root.at("levels")) {
      std::vector<PartitionCell> cells;
      for (const auto& c : level) {
        PartitionCell cell;
        cell.points = c.at("points").get<std::vector<int>>();
        cell.representative = c.at("representative").get<int>();
        cell.parent = c.at("parent").get<int>();
        cells.push_back(std::move(cell));
      }
      tree.levels.push_back(std::move(cells));
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("partition tree json: ") + e.what());
  }
  tree.validate();
  return tree;
}

}  // namespace gchain
