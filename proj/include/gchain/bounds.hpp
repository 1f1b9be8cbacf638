#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gchain/function_class.hpp"
#include "gchain/point_set.hpp"
#include "gchain/random.hpp"

namespace gchain {

// One factor of a closed-form bound, annotated with the expression it
// evaluates so emitted tables are self-documenting.
struct BoundTerm {
  std::string name;
  double value = 0.0;
  std::string formula;
};

struct BoundReport {
  std::vector<BoundTerm> terms;
  double total = 0.0;
  std::vector<std::string> notes;

  double term(const std::string& name) const;  // throws if the name is absent
};

// Inputs of the high-probability risk bound for [0,1]-valued losses.
struct RiskBoundInput {
  double empirical_mean = 0.0;
  int n = 1;
  double g_hat = 0.0;  // Gaussian average of the loss class on the sample
  double delta = 0.05;
};

// empirical_mean + sqrt(2 pi)/n * g_hat + sqrt(9 ln(2/delta) / (2 n))
double theorem1_bound(const RiskBoundInput& input);

// Two kernel layers: a Hilbert-Schmidt ball of width-delta1 feature maps into
// R^m1, composed with an RKHS ball of radius b2 over a width-delta2 kernel.
// The chain-rule constants c1 and c2 are explicit inputs; nothing here
// assumes values for them.
struct TwoLayerSpec {
  double b1 = 1.0;
  double b2 = 1.0;
  double delta1 = 1.0;
  double delta2 = 1.0;
  int m1 = 1;
  int n = 1;
  double c1 = 1.0;
  double c2 = 1.0;

  void validate() const;
};

// All five intermediate factors, the composite Gaussian-average bound
// c1 b1 b2 sqrt(n m1)/delta2 + 2 c2 b1 b2 sqrt(n)/delta2 + b2 sqrt(n), and
// the uniform estimation bound sqrt(2 pi / n) b2 (b1 (c1 sqrt(m1) + 2 c2) /
// delta2 + 1) + sqrt(9 ln(2/delta) / (2 n)).  The empirical loss average
// adds on top of the reported total.
BoundReport two_layer_bound(const TwoLayerSpec& spec, double delta);

struct TwoLayerEmpirical {
  McEstimate g_rep;        // complexity of the representation layer on x
  double g_rep_bound = 0.0;  // b1 sqrt(n m1)
  McEstimate g_base;       // complexity of the top class at the base image
  double g_base_bound = 0.0;  // b2 sqrt(n)
};

// Monte Carlo evaluation of the two data-dependent quantities the closed
// forms dominate.  The representation layer supremum has the closed form
// b1 sqrt(sum_k gamma_k' gram1 gamma_k); the top layer at the base image uses
// the width-delta2 kernel gram of base_image (all points collapsed to one
// when absent, matching a zero base operator).  Throws if either Monte Carlo
// value exceeds its closed-form bound by more than four standard errors.
TwoLayerEmpirical two_layer_empirical(const TwoLayerSpec& spec, const PointSet& x,
                                      std::int64_t budget, GaussianStream stream,
                                      const std::optional<PointSet>& base_image = std::nullopt);

// The same machine shared across tasks: the representation factors pick up
// the larger sample, the task layer scales by the stacking rules, and the
// per-task estimation cost splits into a vanishing representation share and a
// constant task share.
BoundReport multitask_bound(const TwoLayerSpec& spec, int tasks, double delta);

struct MultitaskScaling {
  double stacked_lip = 0.0;
  double base_lip = 0.0;
  McEstimate stacked_r;
  McEstimate base_r;
  double slack = 0.0;  // four combined standard errors
};

// Measures the stacking rules on a concrete class: the Lipschitz constant of
// the per-block product class equals the base constant, and its quotient
// average is at most sqrt(tasks) times the base value plus Monte Carlo slack.
// The supplied pattern is augmented with every diagonal row (i, i, ..., i),
// which realizes each base pair inside the stacked set.  Throws if either
// rule fails on the instance; the Lipschitz comparison is bitwise, so tables
// whose values and points carry short mantissas (dyadic grids) are the
// intended input.
MultitaskScaling multitask_scaling_empirical(const TabulatedClass& f, int tasks,
                                             const StackedPattern& pattern,
                                             std::int64_t budget, GaussianStream stream);

// Per-layer summary for the iterated composition bound.  diam_in is the
// diameter of the layer's input set; g_base is the smallest complexity of the
// layer's image of a single input point; g0 seeds the recursion with the
// complexity of the raw input set and is read from the first layer only (a
// single-point sample seeds 0).
struct LayerSummary {
  double lip = 0.0;
  double r_val = 0.0;
  double g_base = 0.0;
  double diam_in = 0.0;
  int out_dim = 1;
  double g0 = 0.0;
};

// Applies the composition bound layer by layer and also evaluates the closed
// form sum_k c1^(K-k) (prod_{j>k} lip_j) (c2 diam_in_k r_k + g_k) plus
// c1^K (prod_j lip_j) g0; throws unless both evaluations agree to 1e-12
// relative.
BoundReport deep_iterated_bound(const std::vector<LayerSummary>& layers, double c1,
                                double c2);

}  // namespace gchain
