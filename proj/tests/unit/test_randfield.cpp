#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "condgpc/randfield.hpp"
#include "condgpc/rng.hpp"

using namespace condgpc;
using doctest::Approx;

TEST_CASE("lognormal moments") {
  // Oracle: closed form in long double.
  const long double v = 1.0L + (2.5L * 2.5L) / (5.0L * 5.0L);
  const long double sg = std::sqrt(std::log(v));
  const long double mg = std::log(5.0L) - 0.5L * std::log(v);
  const auto m = lognormal_moments(5.0, 2.5);
  CHECK(m.mu_g == Approx(double(mg)).epsilon(1e-14));
  CHECK(m.sigma_g == Approx(double(sg)).epsilon(1e-14));
  CHECK(m.mu_g == Approx(1.497866).epsilon(1e-6));
  CHECK(m.sigma_g == Approx(0.472381).epsilon(1e-6));
  CHECK(std::exp(m.mu_g + 0.5 * m.sigma_g * m.sigma_g) == Approx(5.0).epsilon(1e-12));

  const auto d = lognormal_moments(3.0, 0.0);
  CHECK(d.mu_g == std::log(3.0));
  CHECK(d.sigma_g == 0.0);
}

TEST_CASE("KL on three points matches a hand-built eigensolve") {
  const Grid g = Grid::line({0.0, 1.0}, 3);
  const auto k = CovarianceKernel::squared_exponential(0.7);
  const auto kl = compute_kl(k, g, 1.0, KlTarget::fixed(3));
  Eigen::Matrix3d c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double d = 0.5 * (i - j);
      c(i, j) = std::exp(-d * d / (0.7 * 0.7));
    }
  // Symmetrised Nystrom with trapezoid weights.
  const Eigen::Vector3d w(0.25, 0.5, 0.25);
  const Eigen::Matrix3d a = w.cwiseSqrt().asDiagonal() * c * w.cwiseSqrt().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(a);
  for (int n = 0; n < 3; ++n) {
    CHECK(kl.eigenvalues(n) == Approx(es.eigenvalues()(2 - n)).epsilon(1e-12));
    const Eigen::Vector3d mode = es.eigenvectors().col(2 - n).cwiseQuotient(w.cwiseSqrt());
    const double s = mode.dot(kl.modes.col(n)) > 0 ? 1.0 : -1.0;
    for (int i = 0; i < 3; ++i) CHECK(kl.modes(i, n) == Approx(s * mode(i)).epsilon(1e-10));
  }
}

TEST_CASE("KL modes are orthonormal in the weighted inner product") {
  const Grid g = Grid::line({0.0, 1.0}, 129);
  const auto kl = compute_kl(CovarianceKernel::squared_exponential(0.1), g, 1.0, KlTarget::fixed(10));
  Eigen::VectorXd w(g.size());
  for (std::size_t p = 0; p < g.size(); ++p) w(p) = g.weight(p);
  const Eigen::MatrixXd gram = kl.modes.transpose() * w.asDiagonal() * kl.modes;
  CHECK((gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-8);
  for (Eigen::Index n = 1; n < 10; ++n) CHECK(kl.eigenvalues(n) <= kl.eigenvalues(n - 1));
}

TEST_CASE("energy targets") {
  const Grid g = Grid::line({0.0, 1.0}, 257);
  const auto kl = compute_kl(CovarianceKernel::squared_exponential(0.05), g, 1.0, KlTarget::energy(0.95));
  CHECK(kl.energy_fraction() >= 0.95);
  CHECK(kl.cumulative_fraction(kl.size() - 1) < 0.95);
  MESSAGE("modes for 95% energy: " << kl.size());

  const Grid g2 = Grid::rectangle({0.0, 240.0}, {0.0, 60.0}, 80, 20);
  const auto kl2 = compute_kl(CovarianceKernel::separable_exponential(240.0, 100.0), g2, 1.0, KlTarget::fixed(25));
  CHECK(kl2.energy_fraction() >= 0.95);
}

TEST_CASE("Kronecker and dense routes agree on a separable kernel") {
  const Grid g = Grid::rectangle({0.0, 2.0}, {0.0, 1.0}, 12, 6);
  const auto k = CovarianceKernel::squared_exponential(0.4);
  const auto a = compute_kl(k, g, 1.0, KlTarget::fixed(8), 0.0, KlMethod::Dense);
  const auto b = compute_kl(k, g, 1.0, KlTarget::fixed(8), 0.0, KlMethod::Kronecker);
  for (int n = 0; n < 8; ++n) CHECK(a.eigenvalues(n) == Approx(b.eigenvalues(n)).epsilon(1e-9));
}

TEST_CASE("realizations") {
  const Grid g = Grid::line({0.0, 1.0}, 65);
  const auto kl = compute_kl(CovarianceKernel::squared_exponential(0.2), g, 0.5, KlTarget::fixed(6), 1.2);
  std::vector<double> xi(6, 0.0);
  const Field m = sample_realization(kl, xi);
  for (std::size_t p = 0; p < g.size(); ++p) CHECK(m[p] == 1.2);
  xi[0] = 1.0;
  const Field e1 = sample_realization(kl, xi);
  for (std::size_t p = 0; p < g.size(); ++p)
    CHECK(e1[p] == Approx(1.2 + 0.5 * std::sqrt(kl.eigenvalues(0)) * kl.modes(p, 0)).epsilon(1e-13));

  // Monte Carlo pointwise variance.
  Rng rng(99);
  const int n = 10000;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(g.size()), s2 = s1;
  for (int t = 0; t < n; ++t) {
    for (auto& v : xi) v = rng.normal();
    const Field f = sample_realization(kl, xi);
    for (std::size_t p = 0; p < g.size(); ++p) {
      s1(p) += f[p];
      s2(p) += f[p] * f[p];
    }
  }
  const Field var = kl.variance_field();
  for (std::size_t p = 0; p < g.size(); p += 8) {
    const double mc = s2(p) / n - std::pow(s1(p) / n, 2);
    CHECK(mc == Approx(var[p]).epsilon(0.05));
  }
}
