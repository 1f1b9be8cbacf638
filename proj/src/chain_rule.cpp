#include "gchain/chain_rule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gchain/gaussian_average.hpp"

namespace gchain {

namespace {

bool has_distinct_pair(const PointSet& y) {
  for (std::size_t i = 0; i + 1 < y.points.size(); ++i)
    for (std::size_t j = i + 1; j < y.points.size(); ++j)
      if (y.points[i] != y.points[j]) return true;
  return false;
}

}  // namespace

ChainTerms chain_terms(const TabulatedClass& f, const PointSet& y, int y0_index,
                       std::int64_t budget, GaussianStream stream) {
  f.validate();
  y.validate();
  if (y0_index < 0 || y0_index >= static_cast<int>(y.points.size()))
    throw invariant_error("chain_terms: base point index out of range");

  ChainTerms t;
  t.y0_index = y0_index;
  t.d_y = diameter(y);

  const GaussianStream image_stream = stream.substream(4);
  t.lhs = estimate_gaussian_average(image_set(f, y), budget, image_stream);
  t.g_y = estimate_gaussian_average(y, budget, stream.substream(5));

  PointSet y0;
  y0.dim = y.dim;
  y0.points.push_back(y.points[y0_index]);
  t.base = estimate_gaussian_average(image_set(f, y0), budget, image_stream);

  const GaussianStream quot_stream = stream.substream(6);
  if (has_distinct_pair(y)) {
    t.l_f = lipschitz_constant(f, y);
    t.r_f = estimate_quotient_average(f, y, budget, quot_stream);
  } else {
    t.l_f = 0.0;
    t.r_f.value = 0.0;
    t.r_f.std_error = 0.0;
    t.r_f.samples = 0;
    t.r_f.seed = quot_stream.seed;
    t.r_f.stream_id = quot_stream.stream_id;
  }
  return t;
}

double constraint_bound_side(const ChainTerms& t, double c1, double c2) {
  return c1 * (t.l_f * t.g_y.value) + c2 * (t.d_y * t.r_f.value) + t.base.value;
}

namespace {

struct Constraint {
  double a = 0.0;  // l_f * g_y
  double b = 0.0;  // d_y * r_f
  double v = 0.0;  // lhs - base
  int idx = -1;
};

bool exactly_feasible(const std::vector<ChainTerms>& suite, const std::vector<int>& dropped,
                      double c1, double c2) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    if (d < dropped.size() && dropped[d] == static_cast<int>(i)) {
      ++d;
      continue;
    }
    if (suite[i].lhs.value > constraint_bound_side(suite[i], c1, c2)) return false;
  }
  return true;
}

}  // namespace

FittedConstants fit_constants(const std::vector<ChainTerms>& suite) {
  if (suite.empty()) throw invariant_error("fit_constants: empty suite");

  FittedConstants fit;
  std::vector<Constraint> cons;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    Constraint c;
    c.a = suite[i].l_f * suite[i].g_y.value;
    c.b = suite[i].d_y * suite[i].r_f.value;
    c.v = suite[i].lhs.value - suite[i].base.value;
    c.idx = static_cast<int>(i);
    if (c.v > 0.0 && c.a <= 0.0 && c.b <= 0.0) {
      fit.dropped.push_back(c.idx);
      continue;
    }
    cons.push_back(c);
  }
  fit.instances = static_cast<int>(cons.size());

  // corner-point candidates of the feasible region
  std::vector<std::array<double, 2>> cands;
  cands.push_back({0.0, 0.0});
  std::vector<const Constraint*> active;
  for (const auto& c : cons)
    if (c.v > 0.0) active.push_back(&c);
  for (const Constraint* c : active) {
    if (c->a > 0.0) cands.push_back({c->v / c->a, 0.0});
    if (c->b > 0.0) cands.push_back({0.0, c->v / c->b});
  }
  for (std::size_t i = 0; i < active.size(); ++i)
    for (std::size_t j = i + 1; j < active.size(); ++j) {
      const Constraint& p = *active[i];
      const Constraint& q = *active[j];
      const double det = p.a * q.b - q.a * p.b;
      const double scale = std::max({std::abs(p.a * q.b), std::abs(q.a * p.b), 1e-300});
      if (std::abs(det) <= 1e-12 * scale) continue;
      double x = (p.v * q.b - q.v * p.b) / det;
      double y = (p.a * q.v - q.a * p.v) / det;
      if (x < 0.0 || y < 0.0) continue;
      cands.push_back({x, y});
    }

  // feasibility with a hair of tolerance, so corner points are not rejected
  // for sitting a rounding error below their own defining lines
  auto near_feasible = [&](double x, double y) {
    for (const Constraint* c : active) {
      const double lhs = c->a * x + c->b * y;
      if (lhs < c->v - 1e-9 * std::max(1.0, std::abs(c->v))) return false;
    }
    return true;
  };

  bool found = false;
  std::array<double, 2> best = {0.0, 0.0};
  std::vector<std::array<double, 2>> feas;
  for (const auto& cand : cands) {
    if (!near_feasible(cand[0], cand[1])) continue;
    feas.push_back(cand);
    if (!found || cand[0] + cand[1] < best[0] + best[1] ||
        (cand[0] + cand[1] == best[0] + best[1] && cand[0] < best[0])) {
      best = cand;
      found = true;
    }
  }
  if (!found) throw invariant_error("fit_constants: no feasible corner point");

  // nudge up until every kept constraint holds at plain double comparison
  double c1 = best[0];
  double c2 = best[1];
  double bump = 1e-15;
  for (int it = 0; it < 80; ++it) {
    if (exactly_feasible(suite, fit.dropped, c1, c2)) break;
    c1 = best[0] * (1.0 + bump) + bump * 1e-6;
    c2 = best[1] * (1.0 + bump) + bump * 1e-6;
    bump *= 2.0;
  }
  if (!exactly_feasible(suite, fit.dropped, c1, c2))
    throw invariant_error("fit_constants: could not certify the fitted constants");
  fit.c1 = c1;
  fit.c2 = c2;

  // tightest active constraint at the optimum
  double best_slack = 0.0;
  for (const Constraint* c : active) {
    const double slack = (c->a * c1 + c->b * c2 - c->v) / std::max(1.0, std::abs(c->v));
    if (fit.binding_instance < 0 || slack < best_slack) {
      fit.binding_instance = c->idx;
      best_slack = slack;
    }
  }

  // non-dominated feasible corners, ascending in the first coordinate
  std::sort(feas.begin(), feas.end());
  feas.erase(std::unique(feas.begin(), feas.end()), feas.end());
  for (const auto& p : feas) {
    bool dominated = false;
    for (const auto& q : feas)
      if (q[0] <= p[0] && q[1] <= p[1] && (q[0] < p[0] || q[1] < p[1])) {
        dominated = true;
        break;
      }
    if (!dominated) fit.pareto.push_back(p);
  }
  return fit;
}

bool constraints_hold(const std::vector<ChainTerms>& suite, const FittedConstants& fit) {
  return exactly_feasible(suite, fit.dropped, fit.c1, fit.c2);
}

TailReport proof_tail_check(const TabulatedClass& f, const PointSet& y,
                            const std::vector<std::pair<int, int>>& pairs,
                            const std::vector<double>& s_grid, std::int64_t trials,
                            GaussianStream stream) {
  f.validate();
  y.validate();
  if (pairs.empty()) throw invariant_error("proof_tail_check: no pairs requested");
  if (s_grid.empty()) throw invariant_error("proof_tail_check: empty threshold grid");
  for (double s : s_grid)
    if (!(s >= 0.0)) throw invariant_error("proof_tail_check: thresholds must be >= 0");
  if (trials < 1000) throw invariant_error("proof_tail_check: trials must be >= 1000");
  const int n = static_cast<int>(y.points.size());
  for (const auto& [i, j] : pairs) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw invariant_error("proof_tail_check: pair index out of range");
    if (y.points[i] == y.points[j])
      throw invariant_error("proof_tail_check: pair points must be distinct");
  }

  TailReport rep;
  rep.lipschitz = has_distinct_pair(y) ? lipschitz_constant(f, y) : 0.0;
  if (rep.lipschitz == 0.0) {
    rep.trivial = true;
    return rep;
  }

  // per-pair member difference rows, unnormalized
  const int m = f.out_dim;
  const std::size_t n_pairs = pairs.size();
  std::vector<double> dist(n_pairs);
  std::vector<std::vector<double>> rows(n_pairs);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const auto& [i, j] = pairs[p];
    dist[p] = std::sqrt(squared_distance(y.points[i], y.points[j]));
    const int ia = find_point_index(f.bound_points, y.points[i]);
    const int ib = find_point_index(f.bound_points, y.points[j]);
    if (ia < 0 || ib < 0)
      throw invariant_error("proof_tail_check: class is not tabulated on a requested point");
    rows[p].resize(f.size() * m);
    for (std::size_t k = 0; k < f.size(); ++k)
      for (int c = 0; c < m; ++c)
        rows[p][k * m + c] = f.values[k][ia][c] - f.values[k][ib][c];
  }

  // shared draws across pairs
  const GaussianStream tail_stream = stream.substream(7);
  std::vector<double> gamma(m);
  std::vector<std::vector<double>> z(n_pairs, std::vector<double>(trials));
  for (std::int64_t t = 0; t < trials; ++t) {
    tail_stream.fill_normal(static_cast<std::uint64_t>(t), gamma);
    for (std::size_t p = 0; p < n_pairs; ++p) {
      double best = 0.0;
      bool first = true;
      for (std::size_t k = 0; k < f.size(); ++k) {
        const double* row = rows[p].data() + k * m;
        double s = 0.0;
        for (int c = 0; c < m; ++c) s += row[c] * gamma[c];
        if (first || s > best) best = s;
        first = false;
      }
      z[p][t] = best;
    }
  }

  std::vector<double> mean(n_pairs, 0.0);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    double sum = 0.0;
    for (std::int64_t t = 0; t < trials; ++t) sum += z[p][t];
    mean[p] = sum / static_cast<double>(trials);
    const double cap = mean[p] / dist[p];
    if (cap > rep.quotient_cap) rep.quotient_cap = cap;
  }

  const double lsq = rep.lipschitz * rep.lipschitz;
  const double shift = std::exp(rep.quotient_cap * rep.quotient_cap / (2.0 * lsq));
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const double sigma_sq = lsq * dist[p] * dist[p];
    for (double s : s_grid) {
      TailRow row;
      row.pair_index = static_cast<int>(p);
      row.s = s;
      std::int64_t over_centered = 0;
      std::int64_t over_raw = 0;
      for (std::int64_t t = 0; t < trials; ++t) {
        if (z[p][t] > mean[p] + s) ++over_centered;
        if (z[p][t] > s) ++over_raw;
      }
      row.centered_frequency =
          static_cast<double>(over_centered) / static_cast<double>(trials);
      row.raw_frequency = static_cast<double>(over_raw) / static_cast<double>(trials);
      row.centered_bound = std::exp(-s * s / (2.0 * sigma_sq));
      row.raw_bound = shift * std::exp(-s * s / (4.0 * sigma_sq));
      const double shifted = s > mean[p]
                                 ? std::min(1.0, std::exp(-(s - mean[p]) * (s - mean[p]) /
                                                          (2.0 * sigma_sq)))
                                 : 1.0;
      row.transform_ok = row.raw_bound >= shifted - 1e-12;
      rep.rows.push_back(row);
    }
  }
  return rep;
}

PointSet sphere_points(int n, int dim, double radius, GaussianStream stream) {
  if (n < 1 || dim < 1) throw invariant_error("sphere_points: need n >= 1 and dim >= 1");
  if (!(radius > 0.0)) throw invariant_error("sphere_points: radius must be positive");
  PointSet y;
  y.dim = dim;
  Eigen::VectorXd v(dim);
  for (int i = 0; i < n; ++i) {
    stream.fill_normal(static_cast<std::uint64_t>(i), {v.data(), static_cast<std::size_t>(dim)});
    y.points.push_back(radius / v.norm() * v);
  }
  return y;
}

TabulatedClass linear_table_class(const PointSet& y, int members, int out_dim,
                                  double lip_cap, GaussianStream stream) {
  y.validate();
  if (members < 1 || out_dim < 1)
    throw invariant_error("linear_table_class: need members >= 1 and out_dim >= 1");
  if (!(lip_cap > 0.0)) throw invariant_error("linear_table_class: cap must be positive");

  const int in_dim = y.dim;
  TabulatedClass f;
  f.in_dim = in_dim;
  f.out_dim = out_dim;
  f.bound_points = y;

  const GaussianStream mat_stream = stream.substream(0);
  const GaussianStream off_stream = stream.substream(1);
  std::vector<double> buf(static_cast<std::size_t>(in_dim) * out_dim);
  Eigen::VectorXd b(out_dim);
  for (int k = 0; k < members; ++k) {
    mat_stream.fill_normal(static_cast<std::uint64_t>(k), buf);
    Eigen::Map<Eigen::MatrixXd> a(buf.data(), out_dim, in_dim);
    const double frob = a.norm();
    if (frob > lip_cap) a *= lip_cap / frob;
    off_stream.fill_normal(static_cast<std::uint64_t>(k),
                           {b.data(), static_cast<std::size_t>(out_dim)});
    std::vector<Eigen::VectorXd> vals;
    vals.reserve(y.points.size());
    for (const auto& p : y.points) vals.push_back(a * p + b);
    f.values.push_back(std::move(vals));
  }
  return f;
}

ChainInstance make_chain_instance(const InstanceShape& shape, InstanceKind kind,
                                  GaussianStream stream) {
  const int n = kind == InstanceKind::one_point ? 1 : shape.n_points;
  const int members = kind == InstanceKind::one_function ? 1 : shape.members;
  ChainInstance inst;
  inst.y = sphere_points(n, shape.in_dim, shape.radius, stream.substream(0));
  inst.f = linear_table_class(inst.y, members, shape.out_dim, shape.lip_cap,
                              stream.substream(1));
  return inst;
}

}  // namespace gchain
