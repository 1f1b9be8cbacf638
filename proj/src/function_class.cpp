#include "gchain/function_class.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "gchain/gaussian_average.hpp"

namespace gchain {

// ---------------------------------------------------------------------------
// validation and small helpers
// ---------------------------------------------------------------------------

void TabulatedClass::validate() const {
  if (in_dim <= 0 || out_dim <= 0)
    throw invariant_error("tabulated class: dimensions must be positive");
  bound_points.validate();
  if (bound_points.dim != in_dim)
    throw invariant_error("tabulated class: bound point dimension mismatch");
  if (values.empty()) throw invariant_error("tabulated class: no members");
  for (const auto& member : values) {
    if (member.size() != bound_points.points.size())
      throw invariant_error("tabulated class: member not tabulated on every point");
    for (const auto& v : member)
      if (v.size() != out_dim)
        throw invariant_error("tabulated class: value dimension mismatch");
  }
}

double KernelBallClass::eval_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  if (kernel) return kernel(a, b);
  return std::exp(-squared_distance(a, b) / (2.0 * kernel_width * kernel_width));
}

void KernelBallClass::validate() const {
  if (!(kernel_width > 0.0)) throw invariant_error("kernel ball: width must be positive");
  if (!(ball_radius > 0.0)) throw invariant_error("kernel ball: radius must be positive");
  if (stack_count < 1) throw invariant_error("kernel ball: stack count must be >= 1");
}

int find_point_index(const PointSet& ps, const Eigen::VectorXd& p) {
  if (static_cast<int>(p.size()) != ps.dim) return -1;
  for (std::size_t i = 0; i < ps.points.size(); ++i)
    if (ps.points[i] == p) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<int> resolve_indices(const TabulatedClass& f, const PointSet& y, const char* op) {
  if (y.dim != f.in_dim)
    throw invariant_error(std::string(op) + ": input dimension mismatch");
  std::vector<int> idx;
  idx.reserve(y.points.size());
  for (const auto& p : y.points) {
    const int i = find_point_index(f.bound_points, p);
    if (i < 0)
      throw invariant_error(std::string(op) + ": class is not tabulated on a requested point");
    idx.push_back(i);
  }
  return idx;
}

}  // namespace

// ---------------------------------------------------------------------------
// image set, lipschitz constants, quotient sets
// ---------------------------------------------------------------------------

PointSet image_set(const TabulatedClass& f, const PointSet& y) {
  f.validate();
  y.validate();
  const std::vector<int> idx = resolve_indices(f, y, "image_set");

  PointSet out;
  out.dim = f.out_dim;
  out.points.reserve(f.size() * y.points.size());
  out.labels.reserve(f.size() * y.points.size());
  for (std::size_t m = 0; m < f.size(); ++m)
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.points.push_back(f.values[m][idx[i]]);
      out.labels.push_back("m" + std::to_string(m) + "@p" + std::to_string(i));
    }
  return out;
}

double lipschitz_constant(const TabulatedClass& f, const PointSet& y) {
  f.validate();
  y.validate();
  const std::vector<int> idx = resolve_indices(f, y, "lipschitz_constant");

  double best_sq = -1.0;
  for (std::size_t a = 0; a + 1 < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const double dsq = squared_distance(y.points[a], y.points[b]);
      if (dsq == 0.0) continue;
      for (std::size_t m = 0; m < f.size(); ++m) {
        const double vsq = squared_distance(f.values[m][idx[a]], f.values[m][idx[b]]);
        const double r = vsq / dsq;
        if (r > best_sq) best_sq = r;
      }
    }
  if (best_sq < 0.0)
    throw invariant_error("lipschitz_constant: no pair of distinct points");
  return std::sqrt(best_sq);
}

double ambient_lipschitz_constant(const KernelBallClass& f) {
  f.validate();
  return f.ball_radius / f.kernel_width;
}

namespace {

std::vector<std::vector<Eigen::VectorXd>> split_blocks(const KernelBallClass& f,
                                                       const PointSet& y) {
  if (y.dim % f.stack_count != 0)
    throw invariant_error("kernel ball: point dimension is not a multiple of the stack count");
  const int bd = y.dim / f.stack_count;
  std::vector<std::vector<Eigen::VectorXd>> blocks(y.points.size());
  for (std::size_t i = 0; i < y.points.size(); ++i) {
    blocks[i].reserve(f.stack_count);
    for (int t = 0; t < f.stack_count; ++t)
      blocks[i].push_back(y.points[i].segment(t * bd, bd));
  }
  return blocks;
}

// gram of the difference features psi(a_t) - psi(b_t), symmetrized
Eigen::MatrixXd pair_gram(const KernelBallClass& f,
                          const std::vector<Eigen::VectorXd>& a,
                          const std::vector<Eigen::VectorXd>& b) {
  const int n = f.stack_count;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m(i, j) = f.eval_kernel(a[i], a[j]) - f.eval_kernel(a[i], b[j]) -
                f.eval_kernel(b[i], a[j]) + f.eval_kernel(b[i], b[j]);
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  return sym;
}

}  // namespace

double detail::check_psd(Eigen::MatrixXd& gram, const char* what) {
  gram = 0.5 * (gram + gram.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -1e-8)
    throw invariant_error(std::string(what) + ": gram matrix has a negative eigenvalue");
  return std::max(es.eigenvalues().maxCoeff(), 0.0);
}

double lipschitz_constant(const KernelBallClass& f, const PointSet& y) {
  f.validate();
  y.validate();
  const auto blocks = split_blocks(f, y);

  double best_sq = -1.0;
  for (std::size_t a = 0; a + 1 < y.points.size(); ++a)
    for (std::size_t b = a + 1; b < y.points.size(); ++b) {
      const double dsq = squared_distance(y.points[a], y.points[b]);
      if (dsq == 0.0) continue;
      Eigen::MatrixXd m = pair_gram(f, blocks[a], blocks[b]);
      const double top = detail::check_psd(m, "lipschitz_constant");
      const double r = f.ball_radius * f.ball_radius * top / dsq;
      if (r > best_sq) best_sq = r;
    }
  if (best_sq < 0.0)
    throw invariant_error("lipschitz_constant: no pair of distinct points");
  return std::sqrt(best_sq);
}

PointSet quotient_set(const TabulatedClass& f, const Eigen::VectorXd& a,
                      const Eigen::VectorXd& b) {
  f.validate();
  const int ia = find_point_index(f.bound_points, a);
  const int ib = find_point_index(f.bound_points, b);
  if (ia < 0 || ib < 0)
    throw invariant_error("quotient_set: class is not tabulated on a requested point");
  if (a == b) throw invariant_error("quotient_set: points must be distinct");
  const double dist = std::sqrt(squared_distance(a, b));

  PointSet out;
  out.dim = f.out_dim;
  out.points.reserve(f.size());
  out.labels.reserve(f.size());
  for (std::size_t m = 0; m < f.size(); ++m) {
    Eigen::VectorXd q(f.out_dim);
    for (int c = 0; c < f.out_dim; ++c)
      q[c] = (f.values[m][ia][c] - f.values[m][ib][c]) / dist;
    out.points.push_back(q);
    out.labels.push_back("m" + std::to_string(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// quotient averages
// ---------------------------------------------------------------------------

std::vector<PairTerm> quotient_pair_terms(const TabulatedClass& f, const PointSet& y,
                                          std::int64_t budget, GaussianStream stream) {
  f.validate();
  y.validate();
  resolve_indices(f, y, "quotient_pair_terms");

  std::vector<PairTerm> terms;
  for (std::size_t i = 0; i < y.points.size(); ++i)
    for (std::size_t j = 0; j < y.points.size(); ++j) {
      if (i == j || y.points[i] == y.points[j]) continue;
      PairTerm t;
      t.i = static_cast<int>(i);
      t.j = static_cast<int>(j);
      t.distance = std::sqrt(squared_distance(y.points[i], y.points[j]));
      t.term = estimate_gaussian_average(quotient_set(f, y.points[i], y.points[j]),
                                         budget, stream);
      terms.push_back(std::move(t));
    }
  return terms;
}

McEstimate estimate_quotient_average(const TabulatedClass& f, const PointSet& y,
                                     std::int64_t budget, GaussianStream stream) {
  const auto terms = quotient_pair_terms(f, y, budget, stream);
  if (terms.empty())
    throw invariant_error("estimate_quotient_average: no pair of distinct points");
  const PairTerm* best = &terms.front();
  for (const auto& t : terms)
    if (t.term.value > best->term.value) best = &t;
  return best->term;
}

McEstimate estimate_quotient_average(const KernelBallClass& f, const PointSet& y,
                                     std::int64_t budget, GaussianStream stream) {
  f.validate();
  y.validate();
  if (budget < 2) throw invariant_error("estimate_quotient_average: budget must be >= 2");
  const auto blocks = split_blocks(f, y);
  const int n = f.stack_count;

  bool any_pair = false;
  McEstimate best;
  std::vector<double> gamma(n);
  for (std::size_t a = 0; a < y.points.size(); ++a)
    for (std::size_t b = 0; b < y.points.size(); ++b) {
      if (a == b || y.points[a] == y.points[b]) continue;
      const double dist = std::sqrt(squared_distance(y.points[a], y.points[b]));
      Eigen::MatrixXd m = pair_gram(f, blocks[a], blocks[b]);
      detail::check_psd(m, "estimate_quotient_average");

      RunningMoments acc;
      for (std::int64_t k = 0; k < budget; ++k) {
        stream.fill_normal(static_cast<std::uint64_t>(k), gamma);
        double q = 0.0;
        for (int i = 0; i < n; ++i) {
          double row = 0.0;
          for (int j = 0; j < n; ++j) row += m(i, j) * gamma[j];
          q += gamma[i] * row;
        }
        if (q < 0.0) q = 0.0;
        acc.add(f.ball_radius * std::sqrt(q) / dist);
      }
      McEstimate est;
      est.value = acc.mean;
      est.std_error = acc.std_error();
      est.samples = static_cast<std::uint64_t>(budget);
      est.seed = stream.seed;
      est.stream_id = stream.stream_id;
      if (!any_pair || est.value > best.value) best = est;
      any_pair = true;
    }
  if (!any_pair)
    throw invariant_error("estimate_quotient_average: no pair of distinct points");
  return best;
}

// ---------------------------------------------------------------------------
// class constructions
// ---------------------------------------------------------------------------

std::vector<Eigen::VectorXd> convex_combination(const TabulatedClass& f,
                                                const std::vector<double>& weights) {
  f.validate();
  if (weights.size() != f.size())
    throw invariant_error("convex_combination: one weight per member required");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw invariant_error("convex_combination: weights must be >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw invariant_error("convex_combination: weights must sum to 1");

  const std::size_t n_pts = f.bound_points.points.size();
  std::vector<Eigen::VectorXd> member(n_pts);
  for (std::size_t i = 0; i < n_pts; ++i) {
    Eigen::VectorXd v = f.values[0][i];
    for (std::size_t m = 1; m < f.size(); ++m)
      for (int c = 0; c < f.out_dim; ++c)
        v[c] += weights[m] * (f.values[m][i][c] - f.values[0][i][c]);
    member[i] = v;
  }
  return member;
}

TabulatedClass convex_closure_sample(const TabulatedClass& f, int combos,
                                     GaussianStream stream) {
  f.validate();
  if (combos < 0) throw invariant_error("convex_closure_sample: combos must be >= 0");

  TabulatedClass out = f;
  std::vector<double> u(f.size());
  for (int c = 0; c < combos; ++c) {
    stream.fill_uniform(static_cast<std::uint64_t>(c), u);
    std::vector<double> w(f.size());
    double sum = 0.0;
    for (std::size_t m = 0; m < f.size(); ++m) {
      w[m] = -std::log(u[m]);
      sum += w[m];
    }
    for (double& x : w) x /= sum;
    out.values.push_back(convex_combination(f, w));
  }
  return out;
}

ComposedClass precompose(const TabulatedClass& f, const LipschitzMap& phi,
                         const PointSet& z) {
  f.validate();
  z.validate();
  if (!phi.action) throw invariant_error("precompose: map has no action");

  ComposedClass out;
  out.on_inputs.in_dim = z.dim;
  out.on_inputs.out_dim = f.out_dim;
  out.on_inputs.bound_points = z;
  out.on_inputs.values.assign(f.size(), {});
  out.mapped_inputs.dim = f.in_dim;

  std::vector<int> idx;
  idx.reserve(z.points.size());
  for (const auto& p : z.points) {
    const Eigen::VectorXd w = phi.action(p);
    if (w.size() != f.in_dim)
      throw invariant_error("precompose: map output dimension mismatch");
    const int i = find_point_index(f.bound_points, w);
    if (i < 0)
      throw invariant_error("precompose: class is not tabulated on a mapped point");
    idx.push_back(i);
    out.mapped_inputs.points.push_back(w);
  }
  for (std::size_t m = 0; m < f.size(); ++m) {
    out.on_inputs.values[m].reserve(idx.size());
    for (int i : idx) out.on_inputs.values[m].push_back(f.values[m][i]);
  }
  return out;
}

TabulatedClass scale_class(const TabulatedClass& f, double c) {
  f.validate();
  if (!(c >= 0.0)) throw invariant_error("scale_class: factor must be >= 0");
  TabulatedClass out = f;
  for (auto& member : out.values)
    for (auto& v : member) v *= c;
  return out;
}

TabulatedClass sum_class(const TabulatedClass& f, const TabulatedClass& h) {
  f.validate();
  h.validate();
  if (f.in_dim != h.in_dim || f.out_dim != h.out_dim)
    throw invariant_error("sum_class: dimension mismatch");
  if (f.bound_points.points != h.bound_points.points)
    throw invariant_error("sum_class: classes must share bound points");

  TabulatedClass out;
  out.in_dim = f.in_dim;
  out.out_dim = f.out_dim;
  out.bound_points = f.bound_points;
  out.values.reserve(f.size() * h.size());
  for (std::size_t a = 0; a < f.size(); ++a)
    for (std::size_t b = 0; b < h.size(); ++b) {
      std::vector<Eigen::VectorXd> member;
      member.reserve(f.bound_points.points.size());
      for (std::size_t i = 0; i < f.bound_points.points.size(); ++i)
        member.push_back(f.values[a][i] + h.values[b][i]);
      out.values.push_back(std::move(member));
    }
  return out;
}

TabulatedClass restrict_class(const TabulatedClass& f, const std::vector<int>& point_idx) {
  f.validate();
  if (point_idx.empty()) throw invariant_error("restrict_class: empty index list");
  for (int i : point_idx)
    if (i < 0 || i >= static_cast<int>(f.bound_points.points.size()))
      throw invariant_error("restrict_class: index out of range");

  TabulatedClass out;
  out.in_dim = f.in_dim;
  out.out_dim = f.out_dim;
  out.bound_points.dim = f.bound_points.dim;
  for (int i : point_idx) out.bound_points.points.push_back(f.bound_points.points[i]);
  out.values.assign(f.size(), {});
  for (std::size_t m = 0; m < f.size(); ++m)
    for (int i : point_idx) out.values[m].push_back(f.values[m][i]);
  return out;
}

// ---------------------------------------------------------------------------
// stacked view
// ---------------------------------------------------------------------------

namespace {

void validate_pattern(std::size_t n_base, int tasks, const StackedPattern& pattern) {
  if (tasks < 1) throw invariant_error("stacked view: tasks must be >= 1");
  if (pattern.blocks.empty()) throw invariant_error("stacked view: no stacked points");
  for (const auto& row : pattern.blocks) {
    if (static_cast<int>(row.size()) != tasks)
      throw invariant_error("stacked view: pattern row length must equal tasks");
    for (int i : row)
      if (i < 0 || i >= static_cast<int>(n_base))
        throw invariant_error("stacked view: pattern index out of range");
  }
}

}  // namespace

PointSet stack_points(const PointSet& base, int tasks, const StackedPattern& pattern) {
  base.validate();
  validate_pattern(base.points.size(), tasks, pattern);
  PointSet out;
  out.dim = base.dim * tasks;
  for (const auto& row : pattern.blocks) {
    Eigen::VectorXd v(out.dim);
    for (int t = 0; t < tasks; ++t)
      v.segment(t * base.dim, base.dim) = base.points[row[t]];
    out.points.push_back(v);
  }
  return out;
}

TabulatedClass stack_class(const TabulatedClass& f, int tasks, const StackedPattern& pattern) {
  f.validate();
  validate_pattern(f.bound_points.points.size(), tasks, pattern);

  double total = 1.0;
  for (int t = 0; t < tasks; ++t) total *= static_cast<double>(f.size());
  if (total > 32768.0)
    throw invariant_error("stack_class: too many member tuples to materialize");
  const std::size_t n_members = static_cast<std::size_t>(total);

  TabulatedClass out;
  out.in_dim = f.in_dim * tasks;
  out.out_dim = f.out_dim * tasks;
  out.bound_points = stack_points(f.bound_points, tasks, pattern);
  out.values.reserve(n_members);

  std::vector<std::size_t> tuple(tasks, 0);
  for (std::size_t m = 0; m < n_members; ++m) {
    std::vector<Eigen::VectorXd> member;
    member.reserve(pattern.blocks.size());
    for (const auto& row : pattern.blocks) {
      Eigen::VectorXd v(out.out_dim);
      for (int t = 0; t < tasks; ++t)
        v.segment(t * f.out_dim, f.out_dim) = f.values[tuple[t]][row[t]];
      member.push_back(std::move(v));
    }
    out.values.push_back(std::move(member));
    // advance tuple, last task fastest
    for (int t = tasks - 1; t >= 0; --t) {
      if (++tuple[t] < f.size()) break;
      tuple[t] = 0;
    }
  }
  return out;
}

McEstimate stacked_quotient_average(const TabulatedClass& f, int tasks,
                                    const StackedPattern& pattern, std::int64_t budget,
                                    GaussianStream stream) {
  f.validate();
  validate_pattern(f.bound_points.points.size(), tasks, pattern);
  if (budget < 2) throw invariant_error("stacked_quotient_average: budget must be >= 2");

  const PointSet stacked = stack_points(f.bound_points, tasks, pattern);
  const int od = f.out_dim;
  const std::size_t n_members = f.size();

  bool any_pair = false;
  McEstimate best;
  std::vector<double> gamma(static_cast<std::size_t>(od) * tasks);
  // anchored quotient rows per block, [task][member][coord]
  std::vector<double> rows(static_cast<std::size_t>(tasks) * n_members * od);

  for (std::size_t a = 0; a < stacked.points.size(); ++a)
    for (std::size_t b = 0; b < stacked.points.size(); ++b) {
      if (a == b || stacked.points[a] == stacked.points[b]) continue;
      const double dist = std::sqrt(squared_distance(stacked.points[a], stacked.points[b]));
      for (int t = 0; t < tasks; ++t) {
        const int pa = pattern.blocks[a][t];
        const int pb = pattern.blocks[b][t];
        for (std::size_t m = 0; m < n_members; ++m)
          for (int c = 0; c < od; ++c) {
            const double q = (f.values[m][pa][c] - f.values[m][pb][c]) / dist;
            const double q0 = (f.values[0][pa][c] - f.values[0][pb][c]) / dist;
            rows[(static_cast<std::size_t>(t) * n_members + m) * od + c] = q - q0;
          }
      }
      RunningMoments acc;
      for (std::int64_t k = 0; k < budget; ++k) {
        stream.fill_normal(static_cast<std::uint64_t>(k), gamma);
        double stat = 0.0;
        for (int t = 0; t < tasks; ++t) {
          double blk_best = 0.0;  // member 0 row is identically zero
          for (std::size_t m = 1; m < n_members; ++m) {
            const double* row = rows.data() + (static_cast<std::size_t>(t) * n_members + m) * od;
            double s = 0.0;
            for (int c = 0; c < od; ++c) s += row[c] * gamma[t * od + c];
            if (s > blk_best) blk_best = s;
          }
          stat += blk_best;
        }
        acc.add(stat);
      }
      McEstimate est;
      est.value = acc.mean;
      est.std_error = acc.std_error();
      est.samples = static_cast<std::uint64_t>(budget);
      est.seed = stream.seed;
      est.stream_id = stream.stream_id;
      if (!any_pair || est.value > best.value) best = est;
      any_pair = true;
    }
  if (!any_pair)
    throw invariant_error("stacked_quotient_average: no pair of distinct stacked points");
  return best;
}

double stacked_lipschitz_constant(const TabulatedClass& f, int tasks,
                                  const StackedPattern& pattern) {
  f.validate();
  validate_pattern(f.bound_points.points.size(), tasks, pattern);
  const PointSet stacked = stack_points(f.bound_points, tasks, pattern);

  double best_sq = -1.0;
  for (std::size_t a = 0; a + 1 < stacked.points.size(); ++a)
    for (std::size_t b = a + 1; b < stacked.points.size(); ++b) {
      const double dsq = squared_distance(stacked.points[a], stacked.points[b]);
      if (dsq == 0.0) continue;
      double num = 0.0;
      for (int t = 0; t < tasks; ++t) {
        const int pa = pattern.blocks[a][t];
        const int pb = pattern.blocks[b][t];
        double blk = 0.0;
        for (std::size_t m = 0; m < f.size(); ++m) {
          const double v = squared_distance(f.values[m][pa], f.values[m][pb]);
          if (v > blk) blk = v;
        }
        num += blk;
      }
      const double r = num / dsq;
      if (r > best_sq) best_sq = r;
    }
  if (best_sq < 0.0)
    throw invariant_error("stacked_lipschitz_constant: no pair of distinct stacked points");
  return std::sqrt(best_sq);
}

}  // namespace gchain
