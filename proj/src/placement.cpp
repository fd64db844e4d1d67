#include "condgpc/placement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "condgpc/io.hpp"
#include "condgpc/log.hpp"
#include "condgpc/rng.hpp"

namespace condgpc {

namespace {

bool by_value_desc(const CriticalPoint& a, const CriticalPoint& b) {
  if (a.value != b.value) return a.value > b.value;
  return a.index < b.index;
}

}  // namespace

std::vector<CriticalPoint> find_critical_points(const Field& f, const CriticalOptions& options) {
  const Grid& g = f.grid();
  std::vector<CriticalPoint> out;
  if (g.dimension() == 1) {
    const std::size_t n = g.size();
    for (std::size_t i = 0; i < n; ++i) {
      bool above = true, below = true;
      if (i > 0) {
        above = above && f[i] > f[i - 1];
        below = below && f[i] < f[i - 1];
      }
      if (i + 1 < n) {
        above = above && f[i] > f[i + 1];
        below = below && f[i] < f[i + 1];
      }
      if (options.maxima && above) out.push_back({i, f[i], CriticalKind::Maximum});
      if (options.minima && below) out.push_back({i, f[i], CriticalKind::Minimum});
    }
  } else {
    const long nx = static_cast<long>(g.count(0)), ny = static_cast<long>(g.count(1));
    auto at = [&](long i, long j) { return f[g.flat_index(i, j)]; };
    for (long i = 0; i < nx; ++i) {
      for (long j = 0; j < ny; ++j) {
        const double v = at(i, j);
        bool above = true, below = true;
        for (long di = -1; di <= 1; ++di)
          for (long dj = -1; dj <= 1; ++dj) {
            if (di == 0 && dj == 0) continue;
            const long a = i + di, b = j + dj;
            if (a < 0 || a >= nx || b < 0 || b >= ny) continue;
            above = above && v > at(a, b);
            below = below && v < at(a, b);
          }
        const std::size_t p = g.flat_index(i, j);
        if (options.maxima && above) {
          out.push_back({p, v, CriticalKind::Maximum});
          continue;
        }
        if (options.minima && below) {
          out.push_back({p, v, CriticalKind::Minimum});
          continue;
        }
        if (!options.saddles || i == 0 || j == 0 || i + 1 == nx || j + 1 == ny) continue;
        const double l = at(i - 1, j), r = at(i + 1, j), d = at(i, j - 1), u = at(i, j + 1);
        const double dxx = l - 2.0 * v + r, dyy = d - 2.0 * v + u;
        if (!(dxx * dyy < 0.0)) continue;
        const bool max_x_min_y = v > l && v > r && v < d && v < u;
        const bool min_x_max_y = v < l && v < r && v > d && v > u;
        if (max_x_min_y || min_x_max_y) out.push_back({p, v, CriticalKind::Saddle});
      }
    }
  }
  std::sort(out.begin(), out.end(), by_value_desc);
  return out;
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::CriticalPoint: return "critical-point";
    case Provenance::BlockFallback: return "block-fallback";
    case Provenance::Uniform: return "uniform";
    case Provenance::Random: return "random";
    case Provenance::Fill: return "fill";
  }
  return "unknown";
}

Provenance provenance_from_string(const std::string& s) {
  for (Provenance p : {Provenance::CriticalPoint, Provenance::BlockFallback, Provenance::Uniform,
                       Provenance::Random, Provenance::Fill})
    if (to_string(p) == s) return p;
  throw std::invalid_argument("unknown provenance: " + s);
}

std::vector<Point> PlacementResult::locations() const {
  std::vector<Point> out;
  for (auto p : points) out.push_back(grid.point(p));
  return out;
}

std::array<std::size_t, 2> block_layout(const Grid& grid, std::size_t n) {
  if (grid.dimension() == 1) return {n, 1};
  const double lx = grid.extent(0).length(), ly = grid.extent(1).length();
  std::array<std::size_t, 2> best{n, 1};
  double mismatch = std::numeric_limits<double>::infinity();
  for (std::size_t r = 1; r <= n; ++r) {
    if (n % r) continue;
    const std::size_t c = n / r;
    const double m = std::abs(lx / double(r) - ly / double(c));
    if (m < mismatch) {
      mismatch = m;
      best = {r, c};
    }
  }
  return best;
}

namespace {

std::size_t block_of(const Grid& g, std::size_t p, const std::array<std::size_t, 2>& layout) {
  const Point x = g.point(p);
  std::size_t b[2] = {0, 0};
  for (int a = 0; a < g.dimension(); ++a) {
    const double t = (x[a] - g.extent(a).lo) / g.extent(a).length();
    b[a] = std::min(static_cast<std::size_t>(t * double(layout[a])), layout[a] - 1);
  }
  return b[0] * layout[1] + b[1];
}

struct Selector {
  const Grid& grid;
  double min_separation;
  PlacementResult result;

  bool taken(std::size_t p) const {
    return std::find(result.points.begin(), result.points.end(), p) != result.points.end();
  }
  bool allowed(std::size_t p) const {
    if (taken(p)) return false;
    if (min_separation <= 0.0) return true;
    const Point x = grid.point(p);
    for (auto q : result.points)
      if (grid.distance(x, grid.point(q)) < min_separation) return false;
    return true;
  }
  bool add(std::size_t p, double score, Provenance prov) {
    if (!allowed(p)) return false;
    result.points.push_back(p);
    result.scores.push_back(score);
    result.provenance.push_back(prov);
    return true;
  }
};

}  // namespace

PlacementResult select_locations(const Field& variance, std::size_t n, double min_separation) {
  const Grid& g = variance.grid();
  if (n == 0 || n > g.size()) throw std::invalid_argument("N_k must be in [1, grid points]");
  Selector sel{g, min_separation, {}};
  sel.result.grid = g;

  const auto critical = find_critical_points(variance, {true, false, true});
  for (const auto& c : critical) {
    if (sel.result.size() == n) break;
    sel.add(c.index, c.value, Provenance::CriticalPoint);
  }

  if (sel.result.size() < n) {
    const auto layout = block_layout(g, n);
    const std::size_t blocks = layout[0] * layout[1];
    std::vector<bool> occupied(blocks, false);
    for (auto p : sel.result.points) occupied[block_of(g, p, layout)] = true;
    std::vector<long> best(blocks, -1);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const std::size_t b = block_of(g, p, layout);
      if (occupied[b]) continue;
      if (best[b] < 0 || variance[p] > variance[static_cast<std::size_t>(best[b])]) best[b] = long(p);
    }
    std::vector<CriticalPoint> candidates;
    for (std::size_t b = 0; b < blocks; ++b)
      if (best[b] >= 0) {
        const auto p = static_cast<std::size_t>(best[b]);
        candidates.push_back({p, variance[p], CriticalKind::Maximum});
      }
    std::sort(candidates.begin(), candidates.end(), by_value_desc);
    for (const auto& c : candidates) {
      if (sel.result.size() == n) break;
      sel.add(c.index, c.value, Provenance::BlockFallback);
    }
  }

  if (sel.result.size() < n) {
    // Blocks exhausted (tiny grids or separation): take remaining points by variance.
    std::vector<CriticalPoint> rest;
    for (std::size_t p = 0; p < g.size(); ++p) rest.push_back({p, variance[p], CriticalKind::Maximum});
    std::sort(rest.begin(), rest.end(), by_value_desc);
    for (const auto& c : rest) {
      if (sel.result.size() == n) break;
      sel.add(c.index, c.value, Provenance::Fill);
    }
  }
  if (sel.result.size() < n) {
    std::ostringstream msg;
    msg << "only " << sel.result.size() << " of " << n
        << " locations satisfy the minimum separation";
    warn(msg.str());
  }
  return sel.result;
}

PlacementResult baseline_locations(const Grid& grid, std::size_t n, BaselineStrategy strategy,
                                   std::uint64_t seed) {
  if (n == 0 || n > grid.size()) throw std::invalid_argument("N_k must be in [1, grid points]");
  PlacementResult r;
  r.grid = grid;
  if (strategy == BaselineStrategy::Random) {
    Rng rng(seed);
    std::vector<std::size_t> perm(grid.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = 0; i < n; ++i) std::swap(perm[i], perm[i + rng.below(perm.size() - i)]);
    r.points.assign(perm.begin(), perm.begin() + static_cast<long>(n));
    std::sort(r.points.begin(), r.points.end());
    r.scores.assign(n, 0.0);
    r.provenance.assign(n, Provenance::Random);
    return r;
  }
  const auto layout = block_layout(grid, n);
  std::vector<bool> used(grid.size(), false);
  for (std::size_t a = 0; a < layout[0]; ++a) {
    for (std::size_t b = 0; b < layout[1]; ++b) {
      Point x{0.0, 0.0};
      x[0] = grid.extent(0).lo + double(a + 1) * grid.extent(0).length() / double(layout[0] + 1);
      if (grid.dimension() == 2)
        x[1] = grid.extent(1).lo + double(b + 1) * grid.extent(1).length() / double(layout[1] + 1);
      std::size_t p = grid.nearest(x).index;
      if (used[p]) {
        // Collision after snapping: nearest unused point instead.
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < grid.size(); ++q) {
          if (used[q]) continue;
          const double d = grid.distance(x, grid.point(q));
          if (d < best) {
            best = d;
            p = q;
          }
        }
      }
      used[p] = true;
      r.points.push_back(p);
    }
  }
  r.scores.assign(n, 0.0);
  r.provenance.assign(n, Provenance::Uniform);
  return r;
}

void write_placement_csv(const PlacementResult& r, const std::string& path) {
  auto out = io::open_for_write(path);
  const int dim = r.grid.dimension();
  out << (dim == 1 ? "x" : "x1,x2") << ",index,score,provenance\n";
  for (std::size_t k = 0; k < r.size(); ++k) {
    const Point x = r.grid.point(r.points[k]);
    out << io::format_double(x[0]) << ',';
    if (dim == 2) out << io::format_double(x[1]) << ',';
    out << r.points[k] << ',' << io::format_double(r.scores[k]) << ',' << to_string(r.provenance[k])
        << '\n';
  }
}

PlacementResult read_placement_csv(const Grid& grid, const std::string& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::getline(in, line);
  PlacementResult r;
  r.grid = grid;
  const int skip = grid.dimension();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != static_cast<std::size_t>(skip + 3))
      throw std::runtime_error("malformed placement row in " + path);
    const std::size_t p = std::stoul(cells[skip]);
    if (p >= grid.size()) throw std::out_of_range("placement index outside grid in " + path);
    r.points.push_back(p);
    r.scores.push_back(std::stod(cells[skip + 1]));
    r.provenance.push_back(provenance_from_string(cells[skip + 2]));
  }
  return r;
}

}  // namespace condgpc
