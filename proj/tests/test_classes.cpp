#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "gchain/function_class.hpp"
#include "gchain/gaussian_average.hpp"
#include "gchain/point_set.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gchain;
using testutil::make_points;

namespace {

TabulatedClass constant_class(const PointSet& bound, const std::vector<Eigen::VectorXd>& consts) {
  TabulatedClass f;
  f.in_dim = bound.dim;
  f.out_dim = static_cast<int>(consts.front().size());
  f.bound_points = bound;
  for (const auto& c : consts)
    f.values.emplace_back(bound.points.size(), c);
  return f;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("image_set: hand cases and labels") {
  auto y1 = make_points({{1.0, 2.0}});
  TabulatedClass single;
  single.in_dim = 2;
  single.out_dim = 1;
  single.bound_points = y1;
  single.values = {{Eigen::VectorXd::Constant(1, 7.0)}};
  auto img = image_set(single, y1);
  CHECK(img.points.size() == 1);
  CHECK(img.dim == 1);
  CHECK(img.points[0][0] == 7.0);
  CHECK(img.labels[0] == "m0@p0");

  auto y = make_points({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  auto two = constant_class(y, {vec2(1.0, 2.0), vec2(-3.0, 4.0)});
  auto img2 = image_set(two, y);
  REQUIRE(img2.points.size() == 6);
  for (int i = 0; i < 3; ++i) {
    CHECK(img2.points[i] == vec2(1.0, 2.0));
    CHECK(img2.points[3 + i] == vec2(-3.0, 4.0));
  }
  CHECK(img2.labels[4] == "m1@p1");
}

TEST_CASE("image_set: matches a double-loop oracle on random classes") {
  std::mt19937 rng(11);
  auto y = testutil::random_point_set(rng, 4, 3);
  auto f = testutil::random_class(rng, y, 3, 2);
  auto img = image_set(f, y);
  REQUIRE(img.points.size() == 12);
  std::size_t k = 0;
  for (std::size_t m = 0; m < f.values.size(); ++m)
    for (std::size_t i = 0; i < y.points.size(); ++i, ++k)
      CHECK(img.points[k] == f.values[m][i]);
}

TEST_CASE("image_set: error paths") {
  std::mt19937 rng(12);
  auto y = testutil::random_point_set(rng, 3, 2);
  auto f = testutil::random_class(rng, y, 2, 1);
  auto stranger = make_points({{9.0, 9.0}});
  CHECK_THROWS_AS(image_set(f, stranger), invariant_error);
  auto wrong_dim = make_points({{1.0, 2.0, 3.0}});
  CHECK_THROWS_AS(image_set(f, wrong_dim), invariant_error);
  TabulatedClass empty;
  empty.in_dim = 2;
  empty.out_dim = 1;
  empty.bound_points = y;
  CHECK_THROWS_AS(image_set(empty, y), invariant_error);
}

TEST_CASE("lipschitz constant: constants, sign-flip isometry, rotation") {
  std::mt19937 rng(21);
  auto y = testutil::random_point_set(rng, 5, 3);
  auto consts = constant_class(y, {vec2(1.0, 2.0), vec2(0.5, -1.0)});
  CHECK(lipschitz_constant(consts, y) == 0.0);

  // flipping signs of coordinates keeps every squared difference identical,
  // so the computed ratio is exactly 1
  TabulatedClass flip;
  flip.in_dim = 3;
  flip.out_dim = 3;
  flip.bound_points = y;
  flip.values.emplace_back();
  for (const auto& p : y.points) {
    Eigen::VectorXd v(3);
    v << -p[0], p[1], -p[2];
    flip.values[0].push_back(v);
  }
  CHECK(lipschitz_constant(flip, y) == 1.0);

  auto y2 = testutil::random_point_set(rng, 6, 2);
  TabulatedClass rot;
  rot.in_dim = 2;
  rot.out_dim = 2;
  rot.bound_points = y2;
  rot.values.emplace_back();
  const double c = std::cos(0.7), s = std::sin(0.7);
  for (const auto& p : y2.points)
    rot.values[0].push_back(vec2(c * p[0] - s * p[1], s * p[0] + c * p[1]));
  CHECK(lipschitz_constant(rot, y2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lipschitz constant: equals a brute-force oracle exactly") {
  std::mt19937 rng(22);
  for (int rep = 0; rep < 10; ++rep) {
    auto y = testutil::random_point_set(rng, 6, 3);
    auto f = testutil::random_class(rng, y, 4, 2);
    // per-pair square root first, maximum second; the library takes the
    // maximum of squared ratios first.  sqrt is monotone, so both agree.
    double best = 0.0;
    for (std::size_t a = 0; a < y.points.size(); ++a)
      for (std::size_t b = 0; b < y.points.size(); ++b) {
        if (a == b) continue;
        const double dsq = squared_distance(y.points[a], y.points[b]);
        if (dsq == 0.0) continue;
        for (std::size_t m = 0; m < f.values.size(); ++m) {
          const double r =
              std::sqrt(squared_distance(f.values[m][a], f.values[m][b]) / dsq);
          if (r > best) best = r;
        }
      }
    CHECK(lipschitz_constant(f, y) == best);
  }
}

TEST_CASE("lipschitz constant: error paths") {
  auto y = make_points({{1.0, 1.0}, {1.0, 1.0}});
  auto f = constant_class(y, {vec2(1.0, 0.0)});
  CHECK_THROWS_AS(lipschitz_constant(f, y), invariant_error);
  auto y1 = make_points({{2.0, 3.0}});
  auto f1 = constant_class(y1, {vec2(1.0, 0.0)});
  CHECK_THROWS_AS(lipschitz_constant(f1, y1), invariant_error);
}

TEST_CASE("kernel ball: ambient constant and validation") {
  KernelBallClass kb;
  kb.kernel_width = 1.5;
  kb.ball_radius = 3.0;
  kb.stack_count = 2;
  CHECK(ambient_lipschitz_constant(kb) == 2.0);

  KernelBallClass bad = kb;
  bad.kernel_width = 0.0;
  CHECK_THROWS_AS(bad.validate(), invariant_error);
  bad = kb;
  bad.ball_radius = 0.0;
  CHECK_THROWS_AS(bad.validate(), invariant_error);
  bad = kb;
  bad.stack_count = 0;
  CHECK_THROWS_AS(bad.validate(), invariant_error);
}

TEST_CASE("kernel ball: finite-set constant has the expected closed forms") {
  std::mt19937 rng(31);
  KernelBallClass kb;
  kb.kernel_width = 0.9;
  kb.ball_radius = 2.0;
  kb.stack_count = 1;

  // two points, one block: the gram matrix is the scalar 2(1 - k(a,b))
  auto y = testutil::random_point_set(rng, 2, 3);
  const double d = std::sqrt(squared_distance(y.points[0], y.points[1]));
  const double hand =
      kb.ball_radius * std::sqrt(2.0 * (1.0 - kb.eval_kernel(y.points[0], y.points[1]))) / d;
  CHECK(lipschitz_constant(kb, y) == doctest::Approx(hand).epsilon(1e-12));

  // never above the ambient constant
  for (int rep = 0; rep < 5; ++rep) {
    auto ys = testutil::random_point_set(rng, 4, 4, 1.5);
    KernelBallClass kb2;
    kb2.kernel_width = 1.1;
    kb2.ball_radius = 1.7;
    kb2.stack_count = 2;
    CHECK(lipschitz_constant(kb2, ys) <= ambient_lipschitz_constant(kb2) + 1e-9);
  }

  // a linear kernel makes the ball a euclidean ball of linear maps, whose
  // constant on two points is exactly the radius
  KernelBallClass lin;
  lin.kernel_width = 1.0;
  lin.ball_radius = 1.25;
  lin.stack_count = 1;
  lin.kernel = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); };
  auto yl = testutil::random_point_set(rng, 2, 3);
  CHECK(lipschitz_constant(lin, yl) == doctest::Approx(lin.ball_radius).epsilon(1e-9));
}

TEST_CASE("kernel ball: gram closed form matches dense ball-boundary sampling") {
  std::mt19937 rng(32);
  for (int inst = 0; inst < 2; ++inst) {
    KernelBallClass kb;
    kb.kernel_width = 0.8 + 0.4 * inst;
    kb.ball_radius = 1.5;
    kb.stack_count = 2;
    auto y = testutil::random_point_set(rng, 2, 4, 1.2);

    // feature coordinates for the four block vectors a1,a2,b1,b2, extracted
    // from the kernel matrix eigendecomposition
    std::vector<Eigen::VectorXd> q;
    for (const auto& p : y.points)
      for (int t = 0; t < 2; ++t) q.push_back(p.segment(2 * t, 2));
    Eigen::MatrixXd kmat(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) kmat(i, j) = kb.eval_kernel(q[i], q[j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kmat);
    Eigen::MatrixXd coords = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                             es.eigenvectors().transpose();
    Eigen::VectorXd d1 = coords.col(0) - coords.col(2);  // psi(a1) - psi(b1)
    Eigen::VectorXd d2 = coords.col(1) - coords.col(3);

    // the kernel-only difference gram agrees with explicit feature vectors
    Eigen::MatrixXd m(2, 2);
    m(0, 0) = kmat(0, 0) - kmat(0, 2) - kmat(2, 0) + kmat(2, 2);
    m(0, 1) = kmat(0, 1) - kmat(0, 3) - kmat(2, 1) + kmat(2, 3);
    m(1, 0) = kmat(1, 0) - kmat(1, 2) - kmat(3, 0) + kmat(3, 2);
    m(1, 1) = kmat(1, 1) - kmat(1, 3) - kmat(3, 1) + kmat(3, 3);
    CHECK(std::abs(m(0, 0) - d1.dot(d1)) < 1e-8);
    CHECK(std::abs(m(0, 1) - d1.dot(d2)) < 1e-8);
    CHECK(std::abs(m(1, 1) - d2.dot(d2)) < 1e-8);

    // per sample, a dense scan of directions on the ball boundary approaches
    // the closed-form supremum from below; the estimates then agree
    const double dist = std::sqrt(squared_distance(y.points[0], y.points[1]));
    GaussianStream stream{900 + static_cast<std::uint64_t>(inst), 5};
    const std::int64_t budget = 250;
    McEstimate closed = estimate_quotient_average(kb, y, budget, stream);

    std::mt19937 dir_rng(400 + inst);
    std::normal_distribution<double> nd;
    RunningMoments dense;
    std::vector<double> gamma(2);
    for (std::int64_t k = 0; k < budget; ++k) {
      stream.fill_normal(static_cast<std::uint64_t>(k), gamma);
      Eigen::VectorXd w = gamma[0] * d1 + gamma[1] * d2;
      const double closed_stat = kb.ball_radius * w.norm() / dist;
      double best = 0.0;
      for (int t = 0; t < 6000; ++t) {
        Eigen::VectorXd u(4);
        for (int c = 0; c < 4; ++c) u[c] = nd(dir_rng);
        const double s = kb.ball_radius * w.dot(u) / u.norm() / dist;
        if (s > best) best = s;
      }
      CHECK(best <= closed_stat + 1e-9);
      dense.add(best);
    }
    CHECK(dense.mean <= closed.value + 1e-9);
    CHECK(dense.mean >= 0.95 * closed.value);
  }
}

TEST_CASE("quotient average: constants and singleton classes give exactly zero") {
  std::mt19937 rng(41);
  auto y = testutil::random_point_set(rng, 4, 3);
  auto consts = constant_class(y, {vec2(1.0, 2.0), vec2(-0.5, 0.25), vec2(3.0, 3.0)});
  GaussianStream stream{7, 0};
  auto r = estimate_quotient_average(consts, y, 500, stream);
  CHECK(r.value == 0.0);
  CHECK(r.std_error == 0.0);

  auto single = testutil::random_class(rng, y, 1, 2);
  auto r1 = estimate_quotient_average(single, y, 500, stream);
  CHECK(r1.value == 0.0);
  CHECK(r1.std_error == 0.0);
}

TEST_CASE("quotient average: pair terms are the gaussian averages of quotient sets") {
  std::mt19937 rng(42);
  auto y = testutil::random_point_set(rng, 4, 2);
  auto f = testutil::random_class(rng, y, 5, 3);
  GaussianStream stream{8, 0};
  const std::int64_t budget = 400;

  auto terms = quotient_pair_terms(f, y, budget, stream);
  CHECK(terms.size() == 12);
  for (const auto& t : terms) {
    auto direct = estimate_gaussian_average(
        quotient_set(f, y.points[t.i], y.points[t.j]), budget, stream);
    CHECK(t.term.value == direct.value);
    CHECK(t.term.std_error == direct.std_error);
  }

  auto best = estimate_quotient_average(f, y, budget, stream);
  double expect = terms.front().term.value;
  for (const auto& t : terms)
    if (t.term.value > expect) expect = t.term.value;
  CHECK(best.value == expect);

  // determinism, and sensitivity to the stream identity
  auto again = estimate_quotient_average(f, y, budget, stream);
  CHECK(again.value == best.value);
  CHECK(again.std_error == best.std_error);
  auto other = estimate_quotient_average(f, y, budget, GaussianStream{8, 1});
  CHECK(other.value != best.value);
}

TEST_CASE("quotient average: bounded by the lipschitz log-cardinality bound") {
  std::mt19937 rng(43);
  for (int rep = 0; rep < 10; ++rep) {
    auto y = testutil::random_point_set(rng, 5, 3);
    auto f = testutil::random_class(rng, y, 8, 2);
    GaussianStream stream{static_cast<std::uint64_t>(50 + rep), 0};
    auto r = estimate_quotient_average(f, y, 1500, stream);
    const double cap = lipschitz_constant(f, y) * std::sqrt(2.0 * std::log(8.0));
    CHECK(r.value <= cap + 4.0 * r.std_error);
  }
}

TEST_CASE("quotient average: error paths") {
  std::mt19937 rng(44);
  auto y = testutil::random_point_set(rng, 3, 2);
  auto f = testutil::random_class(rng, y, 2, 2);
  GaussianStream stream{9, 0};
  CHECK_THROWS_AS(estimate_quotient_average(f, y, 1, stream), invariant_error);

  auto dup = make_points({{1.0, 1.0}, {1.0, 1.0}});
  auto fdup = testutil::random_class(rng, dup, 2, 2);
  CHECK_THROWS_AS(estimate_quotient_average(fdup, dup, 100, stream), invariant_error);
}

TEST_CASE("quotient set: hand cases and errors") {
  auto y = make_points({{0.0, 0.0}, {3.0, 4.0}});
  auto consts = constant_class(y, {vec2(1.0, 2.0), vec2(5.0, 5.0)});
  auto qs = quotient_set(consts, y.points[0], y.points[1]);
  REQUIRE(qs.points.size() == 2);
  CHECK(qs.points[0] == vec2(0.0, 0.0));
  CHECK(qs.points[1] == vec2(0.0, 0.0));
  CHECK(qs.labels[1] == "m1");

  // a single linear map gives A(y - y') / |y - y'|
  Eigen::MatrixXd a(2, 2);
  a << 2.0, -1.0, 0.5, 3.0;
  TabulatedClass lin;
  lin.in_dim = 2;
  lin.out_dim = 2;
  lin.bound_points = y;
  lin.values.emplace_back();
  for (const auto& p : y.points) lin.values[0].push_back(a * p);
  auto ql = quotient_set(lin, y.points[0], y.points[1]);
  REQUIRE(ql.points.size() == 1);
  Eigen::VectorXd expect = a * (y.points[0] - y.points[1]) / 5.0;
  CHECK((ql.points[0] - expect).norm() < 1e-12);

  CHECK_THROWS_AS(quotient_set(consts, y.points[0], y.points[0]), invariant_error);
  CHECK_THROWS_AS(quotient_set(consts, y.points[0], vec2(9.0, 9.0)), invariant_error);
}

TEST_CASE("monotone in the class: appending members never lowers the estimate") {
  std::mt19937 rng(51);
  for (int rep = 0; rep < 5; ++rep) {
    auto y = testutil::random_point_set(rng, 4, 2);
    auto big = testutil::random_class(rng, y, 8, 2);
    TabulatedClass small = big;
    small.values.resize(4);
    GaussianStream stream{static_cast<std::uint64_t>(60 + rep), 0};
    auto rs = estimate_quotient_average(small, y, 600, stream);
    auto rb = estimate_quotient_average(big, y, 600, stream);
    CHECK(rs.value <= rb.value);
  }
}

TEST_CASE("monotone in the point set: sub-sets never raise the estimate") {
  std::mt19937 rng(52);
  for (int rep = 0; rep < 5; ++rep) {
    auto y = testutil::random_point_set(rng, 6, 3);
    auto f = testutil::random_class(rng, y, 5, 2);
    PointSet sub;
    sub.dim = y.dim;
    sub.points.assign(y.points.begin(), y.points.begin() + 3);
    GaussianStream stream{static_cast<std::uint64_t>(70 + rep), 0};
    auto rsub = estimate_quotient_average(f, sub, 600, stream);
    auto rfull = estimate_quotient_average(f, y, 600, stream);
    CHECK(rsub.value <= rfull.value);
  }
}

TEST_CASE("homogeneity: scaling the class scales the estimate") {
  std::mt19937 rng(53);
  auto y = testutil::random_point_set(rng, 4, 2);
  auto f = testutil::random_class(rng, y, 5, 2);
  GaussianStream stream{80, 0};
  auto base = estimate_quotient_average(f, y, 600, stream);

  for (double c : {0.5, 2.0, 4.0}) {
    auto rc = estimate_quotient_average(scale_class(f, c), y, 600, stream);
    CHECK(rc.value == c * base.value);
  }
  auto r0 = estimate_quotient_average(scale_class(f, 0.0), y, 600, stream);
  CHECK(r0.value == 0.0);
  auto rg = estimate_quotient_average(scale_class(f, 1.7), y, 600, stream);
  CHECK(rg.value == doctest::Approx(1.7 * base.value).epsilon(1e-12));
  CHECK_THROWS_AS(scale_class(f, -1.0), invariant_error);
}

TEST_CASE("subadditivity: the sum class never beats the sum of estimates") {
  // planted instance: the two classes vary on disjoint point pairs, with the
  // first member of each identically zero, so every pair term of the sum
  // class coincides bitwise with the corresponding term of one of the two
  auto y = make_points({{0.0, 0.0}, {1.0, 0.0}, {8.0, 0.0}, {8.0, 1.0}});
  std::mt19937 rng(54);
  std::uniform_int_distribution<int> u(-2048, 2048);
  auto planted = [&](std::size_t hot) {
    TabulatedClass f;
    f.in_dim = 2;
    f.out_dim = 2;
    f.bound_points = y;
    f.values.emplace_back(4, vec2(0.0, 0.0));  // zero anchor member
    for (int m = 0; m < 3; ++m) {
      std::vector<Eigen::VectorXd> row(4, vec2(0.0, 0.0));
      row[hot] = vec2(u(rng) / 1024.0, u(rng) / 1024.0);
      f.values.push_back(std::move(row));
    }
    return f;
  };
  auto fa = planted(1);
  auto fb = planted(3);
  GaussianStream stream{81, 0};
  auto ra = estimate_quotient_average(fa, y, 800, stream);
  auto rb = estimate_quotient_average(fb, y, 800, stream);
  auto rsum = estimate_quotient_average(sum_class(fa, fb), y, 800, stream);
  CHECK(rsum.value == std::max(ra.value, rb.value));
  CHECK(rsum.value <= ra.value + rb.value);

  // random instances with a guard for exact argmax ties
  for (int rep = 0; rep < 5; ++rep) {
    auto yr = testutil::random_point_set(rng, 4, 2);
    auto g1 = testutil::random_class(rng, yr, 3, 2);
    auto g2 = testutil::random_class(rng, yr, 3, 2);
    GaussianStream s{static_cast<std::uint64_t>(90 + rep), 0};
    auto r1 = estimate_quotient_average(g1, yr, 500, s);
    auto r2 = estimate_quotient_average(g2, yr, 500, s);
    auto rs = estimate_quotient_average(sum_class(g1, g2), yr, 500, s);
    CHECK(rs.value <= r1.value + r2.value + 1e-12);
  }
}

TEST_CASE("convex closure: estimate is unchanged and combinations are exact") {
  std::mt19937 rng(55);
  auto y = testutil::random_point_set(rng, 4, 2);
  auto f = testutil::random_class(rng, y, 5, 2);
  GaussianStream stream{82, 0};
  auto base = estimate_quotient_average(f, y, 800, stream);
  auto wide = convex_closure_sample(f, 32, GaussianStream{83, 0});
  CHECK(wide.size() == 37);
  auto rw = estimate_quotient_average(wide, y, 800, stream);
  CHECK(rw.value == base.value);
  CHECK(rw.std_error == base.std_error);

  auto same = convex_closure_sample(f, 0, GaussianStream{83, 0});
  CHECK(same.size() == f.size());
  CHECK(same.values[2][1] == f.values[2][1]);

  // halfway between two dyadic constants is their exact midpoint
  auto yb = make_points({{0.0, 0.0}, {1.0, 0.0}});
  auto two = constant_class(yb, {vec2(1.0, 3.0), vec2(5.0, 7.0)});
  auto mid = convex_combination(two, {0.5, 0.5});
  CHECK(mid[0] == vec2(3.0, 5.0));
  CHECK(mid[1] == vec2(3.0, 5.0));

  CHECK_THROWS_AS(convex_combination(two, {0.5}), invariant_error);
  CHECK_THROWS_AS(convex_combination(two, {0.9, 0.3}), invariant_error);
  CHECK_THROWS_AS(convex_combination(two, {1.5, -0.5}), invariant_error);
}

TEST_CASE("precompose: identity, exact scaling, contraction") {
  std::mt19937 rng(56);
  auto z = testutil::dyadic_point_set(rng, 4, 2);
  auto f = testutil::dyadic_class(rng, z, 4, 2);
  GaussianStream stream{84, 0};

  LipschitzMap ident;
  ident.description = "identity";
  ident.lip_bound = 1.0;
  ident.action = [](const Eigen::VectorXd& v) { return v; };
  auto ci = precompose(f, ident, z);
  auto r_comp = estimate_quotient_average(ci.on_inputs, z, 600, stream);
  auto r_base = estimate_quotient_average(f, z, 600, stream);
  CHECK(r_comp.value == r_base.value);
  CHECK(ci.mapped_inputs.points == z.points);

  // halving map, class tabulated on the halved points: both sides scale by
  // an exact power of two
  PointSet half;
  half.dim = 2;
  for (const auto& p : z.points) half.points.push_back(0.5 * p);
  auto g = testutil::dyadic_class(rng, half, 4, 2);
  LipschitzMap halve;
  halve.description = "halve";
  halve.lip_bound = 0.5;
  halve.action = [](const Eigen::VectorXd& v) { return (0.5 * v).eval(); };
  auto ch = precompose(g, halve, z);
  auto r_ch = estimate_quotient_average(ch.on_inputs, z, 600, stream);
  auto r_hal = estimate_quotient_average(g, ch.mapped_inputs, 600, stream);
  CHECK(r_ch.value == 0.5 * r_hal.value);

  // dropping an extra coordinate contracts distances
  PointSet wide;
  wide.dim = 3;
  for (std::size_t i = 0; i < z.points.size(); ++i) {
    Eigen::VectorXd v(3);
    v << z.points[i][0], z.points[i][1], static_cast<double>(i) * 0.75;
    wide.points.push_back(v);
  }
  LipschitzMap drop;
  drop.description = "drop last coordinate";
  drop.lip_bound = 1.0;
  drop.action = [](const Eigen::VectorXd& v) { return v.head(v.size() - 1).eval(); };
  auto cd = precompose(f, drop, wide);
  auto r_cd = estimate_quotient_average(cd.on_inputs, wide, 600, stream);
  CHECK(r_cd.value <= r_base.value + 4.0 * (r_cd.std_error + r_base.std_error));

  LipschitzMap broken;
  broken.description = "unset";
  CHECK_THROWS_AS(precompose(f, broken, z), invariant_error);
  LipschitzMap away;
  away.description = "off table";
  away.lip_bound = 1.0;
  away.action = [](const Eigen::VectorXd& v) { return (3.0 * v).eval(); };
  CHECK_THROWS_AS(precompose(f, away, z), invariant_error);
}

TEST_CASE("sum and restrict: semantics and errors") {
  std::mt19937 rng(57);
  auto y = testutil::random_point_set(rng, 3, 2);
  auto f = testutil::random_class(rng, y, 2, 2);
  auto h = testutil::random_class(rng, y, 3, 2);
  auto s = sum_class(f, h);
  CHECK(s.size() == 6);
  // f-major order: member (a,b) sits at a*|h|+b
  CHECK(s.values[1 * 3 + 2][1] == f.values[1][1] + h.values[2][1]);

  auto other = testutil::random_point_set(rng, 3, 2);
  auto hh = testutil::random_class(rng, other, 3, 2);
  CHECK_THROWS_AS(sum_class(f, hh), invariant_error);

  auto r = restrict_class(f, {2, 0});
  CHECK(r.bound_points.points.size() == 2);
  CHECK(r.bound_points.points[0] == y.points[2]);
  CHECK(r.values[1][0] == f.values[1][2]);
  CHECK_THROWS_AS(restrict_class(f, {}), invariant_error);
  CHECK_THROWS_AS(restrict_class(f, {0, 5}), invariant_error);
}

TEST_CASE("stacked view: points and explicit product class") {
  auto base = make_points({{1.0, 0.0}, {0.0, 2.0}});
  StackedPattern pat;
  pat.blocks = {{0, 1}, {1, 0}};
  auto sp = stack_points(base, 2, pat);
  CHECK(sp.dim == 4);
  REQUIRE(sp.points.size() == 2);
  CHECK(sp.points[0][0] == 1.0);
  CHECK(sp.points[0][3] == 2.0);
  CHECK(sp.points[1][1] == 2.0);
  CHECK(sp.points[1][2] == 1.0);

  std::mt19937 rng(61);
  auto f = testutil::random_class(rng, base, 3, 2);
  auto big = stack_class(f, 2, pat);
  CHECK(big.size() == 9);
  CHECK(big.out_dim == 4);
  // member (a,b) at a*3+b; point 1 has blocks (1,0)
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const auto& v = big.values[a * 3 + b][1];
      CHECK(v.segment(0, 2) == f.values[a][1]);
      CHECK(v.segment(2, 2) == f.values[b][0]);
    }

  auto f8 = testutil::random_class(rng, base, 8, 1);
  StackedPattern deep;
  deep.blocks = {std::vector<int>(6, 0), std::vector<int>(6, 1)};
  CHECK_THROWS_AS(stack_class(f8, 6, deep), invariant_error);

  StackedPattern bad;
  bad.blocks = {{0, 7}};
  CHECK_THROWS_AS(stack_points(base, 2, bad), invariant_error);
}

TEST_CASE("stacked view: factorized estimates match the explicit product") {
  std::mt19937 rng(62);
  auto base = testutil::dyadic_point_set(rng, 3, 2);
  auto f = testutil::dyadic_class(rng, base, 3, 2);
  auto pat = testutil::cyclic_pattern(3, 2, 3);
  auto sp = stack_points(base, 2, pat);
  auto big = stack_class(f, 2, pat);

  CHECK(stacked_lipschitz_constant(f, 2, pat) ==
        doctest::Approx(lipschitz_constant(big, sp)).epsilon(1e-12));

  GaussianStream stream{85, 0};
  auto fast = stacked_quotient_average(f, 2, pat, 800, stream);
  auto slow = estimate_quotient_average(big, sp, 800, stream);
  CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-12));
  CHECK(fast.std_error == doctest::Approx(slow.std_error).epsilon(1e-9));
}

TEST_CASE("stacked view: the planted class keeps its constant exactly") {
  std::mt19937 rng(63);
  auto f = testutil::calibration_class(rng, 5, 2, 2, 3);
  CHECK(lipschitz_constant(f, f.bound_points) == 2.0);
  for (int tasks : {1, 2, 3, 4, 8}) {
    auto pat = testutil::cyclic_pattern(5, tasks, 4);
    CHECK(stacked_lipschitz_constant(f, tasks, pat) == 2.0);
  }
  // the explicit product agrees where it is materializable
  auto pat2 = testutil::cyclic_pattern(5, 2, 4);
  auto big = stack_class(f, 2, pat2);
  auto sp = stack_points(f.bound_points, 2, pat2);
  CHECK(lipschitz_constant(big, sp) == 2.0);
}

TEST_CASE("stacked view: estimate grows at most like sqrt of the task count") {
  std::mt19937 rng(64);
  for (int rep = 0; rep < 2; ++rep) {
    auto f = testutil::calibration_class(rng, 5, 2, 2, 4);
    GaussianStream stream{static_cast<std::uint64_t>(95 + rep), 0};
    auto base = estimate_quotient_average(f, f.bound_points, 1200, stream);
    for (int tasks : {1, 2, 4, 8}) {
      auto pat = testutil::cyclic_pattern(5, tasks, 4);
      auto stacked = stacked_quotient_average(f, tasks, pat, 1200, stream);
      const double cap = std::sqrt(static_cast<double>(tasks)) * base.value;
      const double slack =
          4.0 * (std::sqrt(static_cast<double>(tasks)) * base.std_error + stacked.std_error);
      CHECK(stacked.value <= cap + slack);
    }
  }
}
