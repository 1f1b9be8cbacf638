#include "gchain/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "gchain/errors.hpp"

namespace gchain {

namespace {

constexpr double k_sqrt_2pi = 2.5066282746310005024;

double confidence_tail(double delta, double samples) {
  return std::sqrt(9.0 * std::log(2.0 / delta) / (2.0 * samples));
}

void check_delta(double delta, const char* op) {
  if (!(delta > 0.0 && delta < 1.0))
    throw invariant_error(std::string(op) + ": delta must lie in (0,1)");
}

Eigen::MatrixXd rbf_gram(const std::vector<Eigen::VectorXd>& pts, double width,
                         const char* what) {
  const int n = static_cast<int>(pts.size());
  Eigen::MatrixXd gram(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      gram(i, j) = std::exp(-squared_distance(pts[i], pts[j]) / (2.0 * width * width));
  detail::check_psd(gram, what);
  return gram;
}

}  // namespace

double BoundReport::term(const std::string& name) const {
  for (const auto& t : terms)
    if (t.name == name) return t.value;
  throw invariant_error("bound report: no term named " + name);
}

double theorem1_bound(const RiskBoundInput& input) {
  if (!(input.empirical_mean >= 0.0 && input.empirical_mean <= 1.0))
    throw invariant_error("theorem1_bound: empirical mean must lie in [0,1]");
  if (input.n < 1) throw invariant_error("theorem1_bound: sample size must be positive");
  if (!(input.g_hat >= 0.0))
    throw invariant_error("theorem1_bound: complexity term must be nonnegative");
  check_delta(input.delta, "theorem1_bound");
  const double n = static_cast<double>(input.n);
  return input.empirical_mean + k_sqrt_2pi / n * input.g_hat +
         confidence_tail(input.delta, n);
}

void TwoLayerSpec::validate() const {
  if (!(b1 > 0.0 && b2 > 0.0)) throw invariant_error("two layer spec: ball radii must be positive");
  if (!(delta1 > 0.0 && delta2 > 0.0))
    throw invariant_error("two layer spec: kernel widths must be positive");
  if (m1 < 1 || n < 1)
    throw invariant_error("two layer spec: dimensions and sample size must be positive");
  if (!(c1 > 0.0 && c2 > 0.0))
    throw invariant_error("two layer spec: composition constants must be positive");
}

BoundReport two_layer_bound(const TwoLayerSpec& spec, double delta) {
  spec.validate();
  check_delta(delta, "two_layer_bound");
  const double n = static_cast<double>(spec.n);
  const double m1 = static_cast<double>(spec.m1);

  BoundReport rep;
  const double g_rep = spec.b1 * std::sqrt(n * m1);
  rep.terms.push_back({"representation_complexity", g_rep, "b1*sqrt(n*m1)"});
  const double d_rep = 2.0 * spec.b1 * std::sqrt(n);
  rep.terms.push_back({"representation_diameter", d_rep, "2*b1*sqrt(n)"});
  const double lip = spec.b2 / spec.delta2;
  rep.terms.push_back({"task_layer_lipschitz", lip, "b2/delta2"});
  rep.terms.push_back({"task_layer_quotient", lip, "b2/delta2"});
  const double g_base = spec.b2 * std::sqrt(n);
  rep.terms.push_back({"task_layer_base", g_base, "b2*sqrt(n)"});

  const double composite = spec.c1 * spec.b1 * spec.b2 / spec.delta2 * std::sqrt(n * m1) +
                           2.0 * spec.c2 * spec.b1 * spec.b2 * std::sqrt(n) / spec.delta2 +
                           spec.b2 * std::sqrt(n);
  rep.terms.push_back({"composite_complexity", composite,
                       "c1*b1*b2*sqrt(n*m1)/delta2 + 2*c2*b1*b2*sqrt(n)/delta2 + b2*sqrt(n)"});

  const double estimation =
      std::sqrt(2.0 * 3.14159265358979323846 / n) * spec.b2 *
      (spec.b1 / spec.delta2 * (spec.c1 * std::sqrt(m1) + 2.0 * spec.c2) + 1.0);
  rep.terms.push_back({"estimation_error", estimation,
                       "sqrt(2*pi/n)*b2*(b1*(c1*sqrt(m1)+2*c2)/delta2 + 1)"});
  const double tail = confidence_tail(delta, n);
  rep.terms.push_back({"confidence_tail", tail, "sqrt(9*ln(2/delta)/(2*n))"});

  rep.total = estimation + tail;
  rep.notes.push_back(
      "c1 and c2 are user inputs; the universal constants they stand in for "
      "are unspecified and rather large");
  rep.notes.push_back("the empirical loss average adds on top of the total");
  return rep;
}

TwoLayerEmpirical two_layer_empirical(const TwoLayerSpec& spec, const PointSet& x,
                                      std::int64_t budget, GaussianStream stream,
                                      const std::optional<PointSet>& base_image) {
  spec.validate();
  x.validate();
  if (static_cast<int>(x.size()) != spec.n)
    throw invariant_error("two_layer_empirical: sample size does not match the spec");
  if (budget < 2) throw invariant_error("two_layer_empirical: budget must be at least 2");

  const int n = spec.n;
  const int m1 = spec.m1;

  const Eigen::MatrixXd gram1 = rbf_gram(x.points, spec.delta1,
                                         "two_layer_empirical: first layer gram");

  std::vector<Eigen::VectorXd> base_pts;
  if (base_image) {
    base_image->validate();
    if (static_cast<int>(base_image->size()) != n || base_image->dim != m1)
      throw invariant_error("two_layer_empirical: base image must hold n points in R^m1");
    base_pts = base_image->points;
  } else {
    base_pts.assign(n, Eigen::VectorXd::Zero(m1));
  }
  const Eigen::MatrixXd gram2 = rbf_gram(base_pts, spec.delta2,
                                         "two_layer_empirical: base image gram");

  TwoLayerEmpirical out;
  out.g_rep_bound = spec.b1 * std::sqrt(static_cast<double>(n) * m1);
  out.g_base_bound = spec.b2 * std::sqrt(static_cast<double>(n));

  const GaussianStream rep_stream = stream.substream(0);
  RunningMoments rep_m;
  std::vector<double> buf(static_cast<std::size_t>(n) * m1);
  Eigen::VectorXd col(n);
  for (std::int64_t k = 0; k < budget; ++k) {
    rep_stream.fill_normal(static_cast<std::uint64_t>(k), buf);
    double q = 0.0;
    for (int c = 0; c < m1; ++c) {
      for (int i = 0; i < n; ++i) col[i] = buf[static_cast<std::size_t>(c) * n + i];
      q += col.dot(gram1 * col);
    }
    rep_m.add(spec.b1 * std::sqrt(std::max(q, 0.0)));
  }
  out.g_rep.value = rep_m.mean;
  out.g_rep.std_error = rep_m.std_error();
  out.g_rep.samples = static_cast<std::uint64_t>(budget);
  out.g_rep.seed = rep_stream.seed;
  out.g_rep.stream_id = rep_stream.stream_id;

  const GaussianStream base_stream = stream.substream(1);
  RunningMoments base_m;
  Eigen::VectorXd g(n);
  for (std::int64_t k = 0; k < budget; ++k) {
    base_stream.fill_normal(static_cast<std::uint64_t>(k), {g.data(), static_cast<std::size_t>(n)});
    const double q = g.dot(gram2 * g);
    base_m.add(spec.b2 * std::sqrt(std::max(q, 0.0)));
  }
  out.g_base.value = base_m.mean;
  out.g_base.std_error = base_m.std_error();
  out.g_base.samples = static_cast<std::uint64_t>(budget);
  out.g_base.seed = base_stream.seed;
  out.g_base.stream_id = base_stream.stream_id;

  if (out.g_rep.value > out.g_rep_bound + 4.0 * out.g_rep.std_error)
    throw invariant_error("two_layer_empirical: representation estimate exceeds its closed form");
  if (out.g_base.value > out.g_base_bound + 4.0 * out.g_base.std_error)
    throw invariant_error("two_layer_empirical: base estimate exceeds its closed form");
  return out;
}

BoundReport multitask_bound(const TwoLayerSpec& spec, int tasks, double delta) {
  spec.validate();
  check_delta(delta, "multitask_bound");
  if (tasks < 1) throw invariant_error("multitask_bound: need at least one task");
  const double n = static_cast<double>(spec.n);
  const double m1 = static_cast<double>(spec.m1);
  const double t = static_cast<double>(tasks);

  BoundReport rep;
  const double lip = spec.b2 / spec.delta2;
  rep.terms.push_back({"stacked_lipschitz", lip, "b2/delta2, unchanged by stacking"});
  rep.terms.push_back({"stacked_quotient", std::sqrt(t) * lip, "sqrt(tasks)*b2/delta2"});
  rep.terms.push_back(
      {"stacked_base", t * spec.b2 * std::sqrt(n), "tasks*b2*sqrt(n)"});
  rep.terms.push_back({"representation_complexity", spec.b1 * std::sqrt(t * n * m1),
                       "b1*sqrt(tasks*n*m1)"});
  rep.terms.push_back({"representation_diameter", 2.0 * spec.b1 * std::sqrt(t * n),
                       "2*b1*sqrt(tasks*n)"});

  const double composite =
      spec.c1 * spec.b1 * spec.b2 / spec.delta2 * std::sqrt(t * n * m1) +
      (2.0 * spec.c2 * spec.b1 / spec.delta2 + 1.0) * spec.b2 * t * std::sqrt(n);
  rep.terms.push_back({"composite_complexity", composite,
                       "c1*b1*b2*sqrt(tasks*n*m1)/delta2 + (2*c2*b1/delta2+1)*b2*tasks*sqrt(n)"});

  const double shared = spec.c1 * spec.b1 * spec.b2 / spec.delta2 * std::sqrt(m1 / (n * t));
  rep.terms.push_back({"dominant_representation", shared,
                       "c1*b1*b2*sqrt(m1/(n*tasks))/delta2"});
  const double per_task = (2.0 * spec.c2 * spec.b1 / spec.delta2 + 1.0) * spec.b2 / std::sqrt(n);
  rep.terms.push_back({"dominant_tasks", per_task, "(2*c2*b1/delta2+1)*b2/sqrt(n)"});
  const double tail = confidence_tail(delta, n * t);
  rep.terms.push_back({"confidence_tail", tail, "sqrt(9*ln(2/delta)/(2*n*tasks))"});

  rep.total = shared + per_task;
  rep.notes.push_back(
      "the representation share of the estimation error vanishes as tasks "
      "grow; the per-task share stays");
  return rep;
}

MultitaskScaling multitask_scaling_empirical(const TabulatedClass& f, int tasks,
                                             const StackedPattern& pattern,
                                             std::int64_t budget, GaussianStream stream) {
  f.validate();
  if (tasks < 1) throw invariant_error("multitask_scaling_empirical: need at least one task");

  // make sure every base pair is realized inside the stacked set
  StackedPattern full = pattern;
  std::set<std::vector<int>> rows(full.blocks.begin(), full.blocks.end());
  const int n_base = static_cast<int>(f.bound_points.size());
  for (int i = 0; i < n_base; ++i) {
    std::vector<int> diag(tasks, i);
    if (rows.insert(diag).second) full.blocks.push_back(std::move(diag));
  }

  MultitaskScaling out;
  out.base_lip = lipschitz_constant(f, f.bound_points);
  out.stacked_lip = stacked_lipschitz_constant(f, tasks, full);
  if (out.stacked_lip != out.base_lip)
    throw invariant_error(
        "multitask_scaling_empirical: stacked Lipschitz constant drifted from "
        "the base value");

  out.base_r = estimate_quotient_average(f, f.bound_points, budget, stream.substream(0));
  out.stacked_r = stacked_quotient_average(f, tasks, full, budget, stream.substream(1));
  const double root_t = std::sqrt(static_cast<double>(tasks));
  out.slack = 4.0 * (root_t * out.base_r.std_error + out.stacked_r.std_error);
  if (out.stacked_r.value > root_t * out.base_r.value + out.slack)
    throw invariant_error(
        "multitask_scaling_empirical: stacked quotient average exceeds the "
        "stacking rule");
  return out;
}

BoundReport deep_iterated_bound(const std::vector<LayerSummary>& layers, double c1,
                                double c2) {
  if (layers.empty()) throw invariant_error("deep_iterated_bound: no layers");
  if (!(c1 > 0.0 && c2 > 0.0))
    throw invariant_error("deep_iterated_bound: composition constants must be positive");
  for (const auto& l : layers) {
    if (!(l.lip >= 0.0 && l.r_val >= 0.0 && l.g_base >= 0.0 && l.diam_in >= 0.0))
      throw invariant_error("deep_iterated_bound: layer quantities must be nonnegative");
    if (l.out_dim < 1) throw invariant_error("deep_iterated_bound: output dimension must be positive");
  }
  if (!(layers.front().g0 >= 0.0))
    throw invariant_error("deep_iterated_bound: seed complexity must be nonnegative");

  const int depth = static_cast<int>(layers.size());

  // one composition step at a time
  double recursive = layers.front().g0;
  for (const auto& l : layers)
    recursive = c1 * l.lip * recursive + c2 * l.diam_in * l.r_val + l.g_base;

  // closed form: later layers discount earlier contributions by c1 and their
  // Lipschitz constants
  BoundReport rep;
  double closed = 0.0;
  for (int k = 0; k < depth; ++k) {
    double factor = std::pow(c1, static_cast<double>(depth - 1 - k));
    for (int j = k + 1; j < depth; ++j) factor *= layers[j].lip;
    const double contribution =
        factor * (c2 * layers[k].diam_in * layers[k].r_val + layers[k].g_base);
    closed += contribution;
    rep.terms.push_back({"layer_" + std::to_string(k + 1) + "_contribution", contribution,
                         "c1^(K-k)*prod(lip_j, j>k)*(c2*diam_in_k*r_k + g_k)"});
  }
  double seed_factor = std::pow(c1, static_cast<double>(depth));
  for (const auto& l : layers) seed_factor *= l.lip;
  const double seed = seed_factor * layers.front().g0;
  closed += seed;
  rep.terms.push_back({"input_seed", seed, "c1^K*prod(lip_j)*g0"});
  rep.terms.push_back({"recursive_evaluation", recursive,
                       "g_k = c1*lip_k*g_(k-1) + c2*diam_in_k*r_k + g_base_k"});

  const double scale = std::max({1.0, std::abs(closed), std::abs(recursive)});
  if (!(std::abs(closed - recursive) <= 1e-12 * scale))
    throw invariant_error(
        "deep_iterated_bound: recursion and closed form disagree");

  rep.total = closed;
  rep.notes.push_back("c1 and c2 are user inputs standing in for unspecified universal constants");
  return rep;
}

}  // namespace gchain
