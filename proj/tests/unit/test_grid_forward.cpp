#include <doctest.h>

#include <cmath>
#include <numeric>

#include "condgpc/forward.hpp"
#include "condgpc/grid.hpp"
#include "condgpc/rng.hpp"

using namespace condgpc;
using doctest::Approx;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Field from(const Grid& g, auto f) {
  Field out(g);
  for (std::size_t p = 0; p < g.size(); ++p) out[p] = f(g.point(p));
  return out;
}

}  // namespace

TEST_CASE("grid weights") {
  const Grid g = Grid::line({0.0, 1.0}, 5);
  CHECK(g.spacing(0) == 0.25);
  CHECK(sum(g.weights()) == Approx(1.0).epsilon(1e-15));

  const Grid smooth = Grid::rectangle({0.0, 240.0}, {0.0, 60.0}, 80, 20);
  CHECK(smooth.size() == 1600);
  CHECK(sum(smooth.weights()) == Approx(14400.0).epsilon(1e-12));

  const Grid rough = Grid::rectangle({0.0, 2.0}, {0.0, 1.0}, 128, 64);
  CHECK(sum(rough.weights()) == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("flat indexing is row major in x1") {
  const Grid g = Grid::rectangle({0.0, 4.0}, {0.0, 2.0}, 4, 2);
  CHECK(g.flat_index(2, 1) == 5);
  const auto ij = g.axis_indices(5);
  CHECK(ij[0] == 2);
  CHECK(ij[1] == 1);
  CHECK(g.point(5)[0] == 2.5);
  CHECK(g.point(5)[1] == 1.5);
  CHECK(g.nearest({2.4, 1.6}).index == 5);
}

TEST_CASE("inner product") {
  const Grid g = Grid::line({0.0, 1.0}, 257);
  const Field one(g, 1.0);
  CHECK(inner_product(one, one) == Approx(1.0).epsilon(1e-14));
  const Field x = from(g, [](Point p) { return p[0]; });
  CHECK(std::abs(inner_product(one, x) - 0.5) < 1e-3);
}

TEST_CASE("interpolation") {
  const Grid g = Grid::line({0.0, 1.0}, 11);
  const Field lin = from(g, [](Point p) { return 3.0 * p[0] - 1.0; });
  CHECK(interpolate(lin, g.point(4)) == lin[4]);
  CHECK(interpolate(lin, {0.45, 0.0}) == Approx(0.5 * (lin[4] + lin[5])));

  // Piecewise-linear error on a quadratic shrinks by ~4 per halving of h.
  auto err = [](std::size_t n) {
    const Grid h = Grid::line({0.0, 1.0}, n);
    const Field q = from(h, [](Point p) { return p[0] * p[0]; });
    double e = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      const double x = k / 1000.0;
      e = std::max(e, std::abs(interpolate(q, {x, 0.0}) - x * x));
    }
    return e;
  };
  const double ratio = err(33) / err(65);
  CHECK(ratio == Approx(4.0).epsilon(0.3));

  const Grid g2 = Grid::rectangle({0.0, 1.0}, {0.0, 1.0}, 8, 8);
  const Field plane = from(g2, [](Point p) { return 2.0 * p[0] - p[1]; });
  CHECK(interpolate(plane, {0.5, 0.37}) == Approx(2.0 * 0.5 - 0.37).epsilon(1e-12));
}

TEST_CASE("field csv round trip") {
  const Grid g = Grid::rectangle({0.0, 2.0}, {0.0, 1.0}, 4, 3);
  Rng rng(3);
  Field f(g);
  for (std::size_t p = 0; p < g.size(); ++p) f[p] = rng.normal();
  const std::string path = "grid_roundtrip.csv";
  write_field_csv(f, path);
  const Field back = read_field_csv(g, path);
  for (std::size_t p = 0; p < g.size(); ++p) CHECK(back[p] == f[p]);
}

TEST_CASE("1D solver: constant and two-layer conductivity") {
  const Grid g = Grid::line({0.0, 1.0}, 257);
  const auto bc = BoundaryConditions::left_right(0.0, 2.0);
  const Field u = solve(Field(g, 3.7), bc);
  for (std::size_t p = 0; p < g.size(); ++p) CHECK(u[p] == Approx(2.0 * g.point(p)[0]).epsilon(1e-12));

  const double k1 = 1.0, k2 = 4.0;
  const Field kappa = from(g, [&](Point p) { return p[0] < 0.5 ? k1 : k2; });
  const Field v = solve(kappa, bc);
  const double interface = 2.0 * k2 / (k1 + k2);
  CHECK(std::abs(v[128] - interface) < 2.0 * g.spacing(0) * 2.0);
  // flux is piecewise constant
  const auto q = axial_fluxes(kappa, v, bc);
  for (double qe : q) CHECK(qe == Approx(q.front()).epsilon(1e-10));
}

TEST_CASE("1D solver converges under refinement") {
  auto kappa_of = [](double x) { return std::exp(std::sin(6.0 * x)); };
  auto solve_at = [&](std::size_t n) {
    const Grid g = Grid::line({0.0, 1.0}, n);
    return solve(from(g, [&](Point p) { return kappa_of(p[0]); }), BoundaryConditions::left_right(0.0, 2.0));
  };
  const Field fine = solve_at(1025);
  auto err = [&](std::size_t n) {
    const Field c = solve_at(n);
    double e = 0.0;
    for (std::size_t p = 0; p < c.size(); ++p)
      e = std::max(e, std::abs(c[p] - interpolate(fine, c.grid().point(p))));
    return e;
  };
  CHECK(err(65) / err(129) > 3.0);
}

TEST_CASE("2D solver: linear profile, maximum principle, flux balance") {
  const Grid g = Grid::rectangle({0.0, 240.0}, {0.0, 60.0}, 80, 20);
  const auto bc = BoundaryConditions::left_right(50.0, 25.0);
  const Field u = solve(Field(g, 2.0), bc);
  for (std::size_t p = 0; p < g.size(); ++p)
    CHECK(u[p] == Approx(50.0 - 25.0 * g.point(p)[0] / 240.0).epsilon(1e-10));

  Rng rng(7);
  Field kappa(g);
  for (std::size_t p = 0; p < g.size(); ++p) kappa[p] = std::exp(rng.normal());
  const Field w = solve(kappa, bc);
  for (std::size_t p = 0; p < g.size(); ++p) {
    CHECK(w[p] <= 50.0);
    CHECK(w[p] >= 25.0);
  }

  const Grid small = Grid::rectangle({0.0, 1.0}, {0.0, 1.0}, 8, 8);
  const Field checker = from(small, [](Point p) { return ((p[0] < 0.5) != (p[1] < 0.5)) ? 10.0 : 0.1; });
  const Field s = solve(checker, BoundaryConditions::left_right(1.0, 0.0));
  const auto q = axial_fluxes(checker, s, BoundaryConditions::left_right(1.0, 0.0));
  CHECK(std::abs(q.front() - q.back()) < 1e-10 * std::abs(q.front()));
}

TEST_CASE("solver rejects non-positive conductivity") {
  const Grid g = Grid::line({0.0, 1.0}, 9);
  Field k(g, 1.0);
  k[3] = 0.0;
  CHECK_THROWS(solve(k, BoundaryConditions::left_right(0.0, 1.0)));
}
