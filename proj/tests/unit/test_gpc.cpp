#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "condgpc/gpc.hpp"
#include "condgpc/rng.hpp"

using namespace condgpc;
using doctest::Approx;

namespace {

Eigen::MatrixXd gram(const MultiIndexSet& set, const QuadratureRule& rule) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(Eigen::Index(set.size()), Eigen::Index(set.size()));
  for (std::size_t m = 0; m < rule.size(); ++m) {
    const Eigen::VectorXd phi = evaluate_basis(set, rule.node(m));
    g += rule.weights(Eigen::Index(m)) * phi * phi.transpose();
  }
  return g;
}

double integrate(const QuadratureRule& rule, auto f) {
  double s = 0.0;
  for (std::size_t m = 0; m < rule.size(); ++m) s += rule.weights(Eigen::Index(m)) * f(rule.node(m));
  return s;
}

// u(x, xi) = a(x) + b(x) xi_1 on a small line grid.
ForwardMap linear_stub(const Grid& g) {
  return [g](std::span<const double> xi) {
    Field f(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const double x = g.point(p)[0];
      f[p] = 1.0 + x + std::sin(3.0 * x) * xi[0];
    }
    return f;
  };
}

// Cubic in xi with spatially varying coefficients.
ForwardMap cubic_stub(const Grid& g) {
  return [g](std::span<const double> xi) {
    Field f(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const double x = g.point(p)[0];
      double v = x + xi[0] * xi[1] * xi[2] + x * xi[3] * xi[3] * xi[4] - std::pow(xi[4], 3) + 2.0 * x * x * xi[1];
      f[p] = v;
    }
    return f;
  };
}

}  // namespace

TEST_CASE("Hermite polynomials") {
  CHECK(hermite(0, 0.37) == 1.0);
  CHECK(hermite(2, 1.0) == Approx(0.0).epsilon(1e-15));
  CHECK(hermite(2, 2.0) == Approx(3.0 / std::sqrt(2.0)));
  CHECK(hermite(3, 1.5) == Approx((1.5 * 1.5 * 1.5 - 3 * 1.5) / std::sqrt(6.0)));
  const auto r = gauss_hermite(10);
  for (int m = 0; m <= 5; ++m)
    for (int n = 0; n <= 5; ++n) {
      const double e = integrate(r, [&](auto x) { return hermite(m, x[0]) * hermite(n, x[0]); });
      CHECK(std::abs(e - (m == n)) < 1e-10);
    }
}

TEST_CASE("total-degree index sets") {
  CHECK(total_degree_indices(5, 3).size() == 56);
  const auto one = total_degree_indices(1, 4);
  REQUIRE(one.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK(one[std::size_t(k)][0] == k);
  const auto two = total_degree_indices(2, 2);
  const std::vector<std::vector<int>> expect{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  CHECK(two.indices == expect);
  CHECK(two.find(std::vector<int>{1, 1}) == 4);
  CHECK(total_degree_indices(0, 3).size() == 1);
}

TEST_CASE("Gauss-Hermite rules") {
  const auto two = gauss_hermite(2);
  CHECK(two.nodes(0, 0) == Approx(-1.0).epsilon(1e-14));
  CHECK(two.nodes(0, 1) == Approx(1.0).epsilon(1e-14));
  CHECK(two.weights(0) == Approx(0.5).epsilon(1e-14));
  for (std::size_t q = 2; q <= 12; ++q) {
    const auto r = gauss_hermite(q);
    CHECK(integrate(r, [](auto x) { return x[0] * x[0]; }) == Approx(1.0).epsilon(1e-12));
    CHECK(r.weights.sum() == Approx(1.0).epsilon(1e-12));
  }
  CHECK(gauss_hermite(5).nodes(0, 2) == 0.0);
}

TEST_CASE("tensor rule Gram matrix (d = 5, q = 4)") {
  const auto rule = gauss_hermite_tensor(5, 4);
  CHECK(rule.size() == 1024);
  CHECK(rule.tag == "tensor-q4");
  const auto set = total_degree_indices(5, 3);
  const Eigen::MatrixXd g = gram(set, rule);
  CHECK((g - Eigen::MatrixXd::Identity(56, 56)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(gauss_hermite_tensor(10, 5, 1000), std::length_error);
}

TEST_CASE("Smolyak sparse grids") {
  const auto s1 = smolyak_sparse(1, 3), g1 = gauss_hermite(5);
  REQUIRE(s1.size() == g1.size());
  for (std::size_t m = 0; m < s1.size(); ++m) {
    CHECK(s1.nodes(0, Eigen::Index(m)) == Approx(g1.nodes(0, Eigen::Index(m))).epsilon(1e-13));
    CHECK(s1.weights(Eigen::Index(m)) == Approx(g1.weights(Eigen::Index(m))).epsilon(1e-13));
  }
  for (std::size_t d : {1, 2, 3, 5, 8})
    for (std::size_t l : {1, 2, 3, 4}) CHECK(smolyak_sparse(d, l).weights.sum() == Approx(1.0).epsilon(1e-12));

  const auto sp = smolyak_sparse(5, 3), tp = gauss_hermite_tensor(5, 3);
  auto poly = [](auto x) {
    return 1.0 + x[0] * x[1] * x[2] + 2.0 * x[3] * x[3] - x[4] * x[4] * x[0] + std::pow(x[2], 3) + x[1] * x[1];
  };
  CHECK(integrate(sp, poly) == Approx(integrate(tp, poly)).epsilon(1e-10));
  CHECK(sp.size() < tp.size());

  // Level P+1 integrates products of degree-P basis functions exactly.
  const Eigen::MatrixXd g = gram(total_degree_indices(7, 2), smolyak_sparse(7, 3));
  CHECK((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("default rule switches to Smolyak above six dimensions") {
  CHECK(default_rule(5, 3).tag == "tensor-q4");
  CHECK(default_rule(9, 3).tag == "smolyak-l4");
}

TEST_CASE("surrogate of a linear stub") {
  const Grid g = Grid::line({0.0, 1.0}, 17);
  const auto s = build_surrogate(g, linear_stub(g), 2, gauss_hermite_tensor(3, 3));
  for (std::size_t k = 0; k < s.indices().size(); ++k) {
    const Field c = s.coefficient(k);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const double x = g.point(p)[0];
      const double expect = k == 0 ? 1.0 + x : (k == 1 ? std::sin(3.0 * x) : 0.0);
      CHECK(std::abs(c[p] - expect) < 1e-10);
    }
  }
  // affine in xi_1
  const std::vector<double> a{0.0, 0.4, -1.0}, b{1.0, 0.4, -1.0}, c{2.0, 0.4, -1.0};
  const Field fa = s.eval(a), fb = s.eval(b), fc = s.eval(c);
  for (std::size_t p = 0; p < g.size(); ++p) CHECK(fc[p] - fb[p] == Approx(fb[p] - fa[p]).epsilon(1e-12));
}

TEST_CASE("surrogate reproduces a cubic stub") {
  const Grid g = Grid::line({0.0, 1.0}, 9);
  const auto fwd = cubic_stub(g);
  const auto s = build_surrogate(g, fwd, 3, gauss_hermite_tensor(5, 4));
  Rng rng(4);
  std::vector<double> xi(5);
  for (int t = 0; t < 100; ++t) {
    for (auto& v : xi) v = 2.0 * rng.normal();
    const Field a = s.eval(xi), b = fwd(xi);
    for (std::size_t p = 0; p < g.size(); ++p) CHECK(std::abs(a[p] - b[p]) < 1e-9 * std::max(1.0, std::abs(b[p])));
  }
  CHECK(s.eval_at({0.5, 0.0}, xi) == Approx(s.eval(xi)[4]).epsilon(1e-13));
}

TEST_CASE("mean and variance agree with Monte Carlo") {
  const Grid g = Grid::line({0.0, 1.0}, 9);
  const auto s = build_surrogate(g, cubic_stub(g), 3, gauss_hermite_tensor(5, 4));
  const Field mean = s.mean(), var = s.variance();
  Rng rng(12);
  const int n = 10000;
  std::vector<double> xi(5);
  Eigen::MatrixXd draws(n, Eigen::Index(g.size()));
  for (int t = 0; t < n; ++t) {
    for (auto& v : xi) v = rng.normal();
    const Field f = s.eval(xi);
    for (std::size_t p = 0; p < g.size(); ++p) draws(t, Eigen::Index(p)) = f[p];
  }
  for (Eigen::Index p = 0; p < draws.cols(); ++p) {
    const Eigen::ArrayXd c = draws.col(p).array() - draws.col(p).mean();
    const double v = c.square().mean(), m4 = c.pow(4).mean();
    CHECK(std::abs(draws.col(p).mean() - mean[std::size_t(p)]) <= 3.0 * std::sqrt(v / n));
    CHECK(std::abs(v - var[std::size_t(p)]) <= 3.0 * std::sqrt((m4 - v * v) / n));
  }
}

TEST_CASE("deterministic stub has zero variance") {
  const Grid g = Grid::line({0.0, 1.0}, 5);
  const auto s = build_surrogate(g, [&](std::span<const double>) { return Field(g, 3.0); }, 2, gauss_hermite_tensor(2, 3));
  const Field v = s.variance();
  for (std::size_t p = 0; p < g.size(); ++p) CHECK(v[p] < 1e-20);
  CHECK(s.mean()[2] == Approx(3.0));
}

TEST_CASE("failed node solves carry the node") {
  const Grid g = Grid::line({0.0, 1.0}, 5);
  auto bad = [&](std::span<const double> xi) -> Field {
    if (xi[0] > 1.0) throw std::runtime_error("diverged");
    return Field(g, 1.0);
  };
  try {
    build_surrogate(g, bad, 2, gauss_hermite_tensor(1, 3));
    FAIL("expected throw");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("node") != std::string::npos);
  }
}

TEST_CASE("save and load round trip, thread count does not matter") {
  const Grid g = Grid::line({0.0, 1.0}, 9);
  const auto rule = gauss_hermite_tensor(5, 4);
  const auto a = build_surrogate(g, cubic_stub(g), 3, rule, 1);
  const auto b = build_surrogate(g, cubic_stub(g), 3, rule, 3);
  CHECK((a.coefficients() - b.coefficients()).cwiseAbs().maxCoeff() == 0.0);
  const std::filesystem::path dir = "surrogate_roundtrip";
  save_surrogate(a, dir);
  const auto c = load_surrogate(dir);
  CHECK((a.coefficients() - c.coefficients()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(c.indices().indices == a.indices().indices);
  CHECK(c.rule_tag() == a.rule_tag());
  CHECK(c.grid() == a.grid());
}

TEST_CASE("point probes") {
  const Grid g = Grid::line({0.0, 1.0}, 9);
  const auto s = build_surrogate(g, cubic_stub(g), 3, gauss_hermite_tensor(5, 4));
  const std::vector<Point> at{g.point(3), {0.3, 0.0}};
  const auto probe = make_probe(s, at);
  const std::vector<double> xi{0.1, -0.5, 1.0, 0.3, 0.2};
  const Eigen::VectorXd v = probe.eval(xi);
  CHECK(v(0) == Approx(s.eval(xi)[3]).epsilon(1e-13));
  CHECK(v(1) == Approx(s.eval_at({0.3, 0.0}, xi)).epsilon(1e-13));
}
