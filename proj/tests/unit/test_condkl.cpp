#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "condgpc/condkl.hpp"
#include "condgpc/log.hpp"
#include "condgpc/rng.hpp"

using namespace condgpc;
using doctest::Approx;

namespace {

KLExpansion line_kl(std::size_t nodes, double length, std::size_t modes, double sigma_g = 0.6,
                    double mean = 1.5) {
  const Grid g = Grid::line({0.0, 1.0}, nodes);
  return compute_kl(CovarianceKernel::squared_exponential(length), g, sigma_g, KlTarget::fixed(modes), mean);
}

KappaObservations observe_draw(const KLExpansion& kl, std::vector<std::size_t> points, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xi(kl.size());
  for (auto& v : xi) v = rng.normal();
  return observe_log_kappa(sample_realization(kl, xi), points);
}

Eigen::MatrixXd covariance_of(const ConditionalKL& c) {
  return c.sigma_g() * c.sigma_g() * c.reduced_modes * c.reduced_eigenvalues.asDiagonal() *
         c.reduced_modes.transpose();
}

}  // namespace

TEST_CASE("rank of the projector equals N_G - N_m") {
  const auto kl = line_kl(129, 0.1, 25);
  const auto obs = observe_draw(kl, {3, 10, 17, 24, 31, 38, 45, 52, 59, 66, 73, 80, 87, 94, 101, 108, 115, 122, 125, 128}, 1);
  const auto ckl = condition(kl, obs);
  CHECK(obs.size() == 20);
  CHECK(ckl.dimension() == 5);
  CHECK(ckl.projector_rank() == 5);
}

TEST_CASE("conditioning matches direct Gaussian conditioning (N_G = 4, N_m = 2)") {
  Rng pick(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto kl = line_kl(33, 0.3 + 0.05 * trial, 4, 0.4 + 0.1 * trial, 0.2);
    std::size_t a = pick.below(16), b = 16 + pick.below(17);
    const auto obs = observe_draw(kl, {a, b}, 100 + trial);
    const auto ckl = condition(kl, obs);
    REQUIRE(ckl.dimension() == 2);

    const Eigen::MatrixXd e = kl.modes;
    const Eigen::MatrixXd c = kl.sigma_g * kl.sigma_g * e * kl.eigenvalues.asDiagonal() * e.transpose();
    const Eigen::Index ia = Eigen::Index(obs.points[0]), ib = Eigen::Index(obs.points[1]);
    Eigen::MatrixXd cx(c.rows(), 2);
    cx << c.col(ia), c.col(ib);
    Eigen::Matrix2d s;
    s << c(ia, ia), c(ia, ib), c(ib, ia), c(ib, ib);
    const Eigen::MatrixXd direct = c - cx * s.inverse() * cx.transpose();
    CHECK((covariance_of(ckl) - direct).cwiseAbs().maxCoeff() < 1e-8);

    const Eigen::Vector2d y(obs.values[0] - kl.mean(ia), obs.values[1] - kl.mean(ib));
    const Eigen::VectorXd mean = kl.mean + cx * s.inverse() * y;
    CHECK((ckl.mean - mean).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("samples interpolate the observations and variance vanishes there") {
  const auto kl = line_kl(257, 0.05, 25);
  std::vector<std::size_t> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(6 + 13 * i);
  const auto obs = observe_draw(kl, pts, 5);
  const auto ckl = condition(kl, obs);
  REQUIRE(ckl.dimension() == 5);
  Rng rng(8);
  std::vector<double> xi(5);
  for (int t = 0; t < 50; ++t) {
    for (auto& v : xi) v = 3.0 * rng.normal();
    const auto s = sample_conditional(ckl, xi);
    for (std::size_t i = 0; i < obs.size(); ++i)
      CHECK(std::abs(s.kappa[obs.points[i]] / std::exp(obs.values[i]) - 1.0) < 1e-8);
  }
  const Field var = conditional_variance_field(ckl);
  for (auto p : obs.points) CHECK(var[p] <= 1e-10 * kl.sigma_g * kl.sigma_g);

  std::fill(xi.begin(), xi.end(), 0.0);
  const auto zero = sample_conditional(ckl, xi);
  for (std::size_t p = 0; p < kl.grid.size(); ++p) CHECK(zero.kappa[p] == Approx(std::exp(ckl.mean(Eigen::Index(p)))));
}

TEST_CASE("Monte Carlo variance of conditional samples") {
  const auto kl = line_kl(65, 0.15, 10);
  const auto obs = observe_draw(kl, {8, 30, 50}, 2);
  const auto ckl = condition(kl, obs);
  const Field var = conditional_variance_field(ckl);
  Rng rng(21);
  const int n = 10000;
  std::vector<double> xi(ckl.dimension());
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(65), s2 = s1;
  for (int t = 0; t < n; ++t) {
    for (auto& v : xi) v = rng.normal();
    const auto s = sample_conditional(ckl, xi);
    for (std::size_t p = 0; p < 65; ++p) {
      const double y = s.log_kappa[p];
      s1(Eigen::Index(p)) += y;
      s2(Eigen::Index(p)) += y * y;
    }
  }
  for (std::size_t p = 0; p < 65; p += 4) {
    if (var[p] < 1e-4) continue;
    const double mc = s2(Eigen::Index(p)) / n - std::pow(s1(Eigen::Index(p)) / n, 2);
    CHECK(mc == Approx(var[p]).epsilon(0.05));
  }
}

TEST_CASE("degenerate conditioning") {
  const auto kl = line_kl(65, 0.15, 8);
  const auto none = condition(kl, KappaObservations{});
  CHECK(none.dimension() == 8);
  CHECK((none.mu_tilde.array() == 0.0).all());
  CHECK((none.m_tilde - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((none.reduced_eigenvalues - kl.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  const Field v0 = conditional_variance_field(none), vk = kl.variance_field();
  for (std::size_t p = 0; p < 65; ++p) CHECK(v0[p] == Approx(vk[p]).epsilon(1e-12));

  const auto det = compute_kl(CovarianceKernel::squared_exponential(0.15), kl.grid, 0.0, KlTarget::fixed(8), 2.0);
  const auto d = condition(det, observe_log_kappa(Field(kl.grid, 2.0), std::vector<std::size_t>{3}));
  CHECK(d.dimension() == 0);
}

TEST_CASE("far from observations the variance approaches the unconditional one") {
  const Grid g = Grid::line({0.0, 10.0}, 201);
  const auto kl = compute_kl(CovarianceKernel::squared_exponential(0.3), g, 1.0, KlTarget::fixed(60));
  const auto ckl = condition(kl, observe_draw(kl, {5, 10}, 4));
  const Field v = conditional_variance_field(ckl), u = kl.variance_field();
  CHECK(v[150] == Approx(u[150]).epsilon(1e-6));
}

TEST_CASE("full-rank subset selection") {
  const auto kl = line_kl(257, 0.05, 25);
  std::vector<std::string> warnings;
  auto old = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });

  auto dup = observe_draw(kl, {40, 40, 90}, 3);
  auto sel = select_full_rank_subset(kl, dup);
  CHECK(sel.size() == 2);
  CHECK(sel.dropped.size() == 1);

  const auto spread = observe_draw(kl, {10, 60, 120, 180, 240}, 3);
  CHECK(select_full_rank_subset(kl, spread).size() == 5);

  // Two points 5e-4 L apart (adjacent nodes relative to a long correlation length).
  const Grid fine = Grid::line({0.0, 0.1}, 201);
  const auto kf = compute_kl(CovarianceKernel::squared_exponential(1.0), fine, 0.6, KlTarget::fixed(3));
  const std::vector<Point> loc{{0.05, 0.0}, {0.0505, 0.0}, {0.08, 0.0}};
  const auto near = observe_log_kappa(fine, loc, std::vector<double>{0.1, 0.1, 0.2});
  REQUIRE(near.size() == 3);
  CHECK(select_full_rank_subset(kf, near).size() == 2);
  set_warning_sink(old);
  CHECK(!warnings.empty());
}

TEST_CASE("projection recovers reduced coordinates") {
  const auto kl = line_kl(129, 0.1, 12);
  const auto ckl = condition(kl, observe_draw(kl, {20, 64, 100}, 6));
  const std::vector<double> xi{0.3, -1.2, 0.7, 2.0, -0.4, 0.0, 1.1, -0.9, 0.5};
  REQUIRE(ckl.dimension() == xi.size());
  const auto back = project_to_reduced(ckl, sample_conditional(ckl, xi).log_kappa);
  for (std::size_t i = 0; i < xi.size(); ++i) CHECK(back[i] == Approx(xi[i]).epsilon(1e-8));
}

TEST_CASE("too many observations is an error") {
  const auto kl = line_kl(65, 0.15, 4);
  CHECK_THROWS(condition(kl, observe_draw(kl, {1, 10, 20, 30, 40}, 1)));
}
