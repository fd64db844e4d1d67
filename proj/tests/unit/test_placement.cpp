#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "condgpc/placement.hpp"

using namespace condgpc;
using doctest::Approx;

namespace {

Field from(const Grid& g, auto f) {
  Field out(g);
  for (std::size_t p = 0; p < g.size(); ++p) out[p] = f(g.point(p));
  return out;
}

// Three bumps of increasing height at 1/6, 1/2, 5/6.
Field bumps(const Grid& g) {
  return from(g, [](Point x) {
    const double s = std::sin(3.0 * std::numbers::pi * x[0]);
    return s * s * (1.0 + 0.2 * x[0]);
  });
}

}  // namespace

TEST_CASE("critical points of sin^2") {
  const Grid g = Grid::line({0.0, 1.0}, 201);
  const Field f = from(g, [](Point x) { return std::pow(std::sin(3.0 * std::numbers::pi * x[0]), 2); });
  const auto c = find_critical_points(f);
  REQUIRE(c.size() == 3);
  std::vector<double> xs;
  for (const auto& p : c) xs.push_back(g.point(p.index)[0]);
  std::sort(xs.begin(), xs.end());
  const double expect[] = {1.0 / 6.0, 0.5, 5.0 / 6.0};
  for (int k = 0; k < 3; ++k) CHECK(std::abs(xs[std::size_t(k)] - expect[k]) <= g.spacing(0));
}

TEST_CASE("monotone and constant fields") {
  const Grid g = Grid::line({0.0, 1.0}, 33);
  const auto mono = find_critical_points(from(g, [](Point x) { return x[0]; }));
  REQUIRE(mono.size() == 1);
  CHECK(mono[0].index == 32);
  CHECK(find_critical_points(Field(g, 2.0)).empty());

  const auto flat = select_locations(Field(g, 2.0), 4);
  CHECK(flat.size() == 4);
  for (auto p : flat.provenance) CHECK(p == Provenance::BlockFallback);
}

TEST_CASE("variance placement on three peaks") {
  const Grid g = Grid::line({0.0, 1.0}, 241);
  const Field v = bumps(g);

  const auto three = select_locations(v, 3);
  REQUIRE(three.size() == 3);
  // Brute force: peak points are strict local maxima; descending by value.
  std::vector<std::size_t> peaks;
  for (std::size_t p = 1; p + 1 < g.size(); ++p)
    if (v[p] > v[p - 1] && v[p] > v[p + 1]) peaks.push_back(p);
  std::sort(peaks.begin(), peaks.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  CHECK(three.points == peaks);
  CHECK(std::is_sorted(three.scores.rbegin(), three.scores.rend()));

  const auto six = select_locations(v, 6);
  REQUIRE(six.size() == 6);
  // Oracle: blocks of width 1/6 without a peak contribute their argmax, best three kept.
  std::set<std::size_t> occupied;
  auto block = [&](std::size_t p) { return std::min<std::size_t>(std::size_t(g.point(p)[0] * 6.0), 5); };
  for (auto p : peaks) occupied.insert(block(p));
  std::vector<std::size_t> best(6, g.size());
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto b = block(p);
    if (occupied.count(b)) continue;
    if (best[b] == g.size() || v[p] > v[best[b]]) best[b] = p;
  }
  std::vector<std::size_t> fallback;
  for (auto p : best)
    if (p != g.size()) fallback.push_back(p);
  std::sort(fallback.begin(), fallback.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  fallback.resize(3);
  std::vector<std::size_t> expect = peaks;
  expect.insert(expect.end(), fallback.begin(), fallback.end());
  CHECK(six.points == expect);
  for (int k = 0; k < 3; ++k) CHECK(six.provenance[std::size_t(k)] == Provenance::CriticalPoint);
  for (int k = 3; k < 6; ++k) CHECK(six.provenance[std::size_t(k)] == Provenance::BlockFallback);

  const auto one = select_locations(v, 1);
  CHECK(one.points[0] == std::size_t(std::max_element(v.values().begin(), v.values().end()) - v.values().begin()));
}

TEST_CASE("minimum separation") {
  const Grid g = Grid::line({0.0, 1.0}, 241);
  const auto r = select_locations(bumps(g), 5, 0.15);
  for (std::size_t a = 0; a < r.size(); ++a)
    for (std::size_t b = a + 1; b < r.size(); ++b)
      CHECK(g.distance(g.point(r.points[a]), g.point(r.points[b])) >= 0.15);
}

TEST_CASE("2D saddles and block layout") {
  const Grid g = Grid::rectangle({-1.0, 1.0}, {-1.0, 1.0}, 21, 21);
  const Field saddle = from(g, [](Point x) { return x[0] * x[0] - x[1] * x[1] + 5.0; });
  const auto c = find_critical_points(saddle, {false, false, true});
  REQUIRE(c.size() == 1);
  CHECK(c[0].kind == CriticalKind::Saddle);
  CHECK(g.point(c[0].index)[0] == Approx(0.0).epsilon(1e-12));

  const Grid smooth = Grid::rectangle({0.0, 240.0}, {0.0, 60.0}, 80, 20);
  const auto l = block_layout(smooth, 10);
  CHECK(l[0] == 5);
  CHECK(l[1] == 2);
}

TEST_CASE("baselines") {
  const Grid g = Grid::line({0.0, 1.0}, 257);
  const auto u = baseline_locations(g, 6, BaselineStrategy::Uniform, 0);
  REQUIRE(u.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) CHECK(u.points[k] == g.nearest({double(k + 1) / 7.0, 0.0}).index);

  const auto a = baseline_locations(g, 10, BaselineStrategy::Random, 42);
  const auto b = baseline_locations(g, 10, BaselineStrategy::Random, 42);
  CHECK(a.points == b.points);
  CHECK(std::set<std::size_t>(a.points.begin(), a.points.end()).size() == 10);

  const Grid small = Grid::line({0.0, 1.0}, 9);
  const auto all = baseline_locations(small, 9, BaselineStrategy::Random, 1);
  for (std::size_t p = 0; p < 9; ++p) CHECK(all.points[p] == p);
  const auto allu = baseline_locations(small, 9, BaselineStrategy::Uniform, 1);
  CHECK(std::set<std::size_t>(allu.points.begin(), allu.points.end()).size() == 9);
}

TEST_CASE("placement csv round trip") {
  const Grid g = Grid::rectangle({0.0, 2.0}, {0.0, 1.0}, 16, 8);
  const auto r = select_locations(from(g, [](Point x) { return std::sin(4 * x[0]) * std::cos(3 * x[1]); }), 7);
  write_placement_csv(r, "placement_roundtrip.csv");
  const auto back = read_placement_csv(g, "placement_roundtrip.csv");
  CHECK(back.points == r.points);
  CHECK(back.scores == r.scores);
  CHECK(back.provenance == r.provenance);
}

TEST_CASE("invalid counts") {
  const Grid g = Grid::line({0.0, 1.0}, 5);
  CHECK_THROWS(select_locations(Field(g, 1.0), 0));
  CHECK_THROWS(select_locations(Field(g, 1.0), 6));
}
