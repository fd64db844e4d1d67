#include "condgpc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "condgpc/io.hpp"

namespace condgpc {

namespace {

void check_extent(const Interval& e) {
  if (!(e.hi > e.lo) || !std::isfinite(e.lo) || !std::isfinite(e.hi))
    throw std::invalid_argument("grid extent is degenerate");
}

}  // namespace

Grid Grid::line(Interval extent, std::size_t nodes) {
  check_extent(extent);
  if (nodes < 2) throw std::invalid_argument("1D grid needs at least 2 nodes");
  Grid g;
  g.dim_ = 1;
  g.extents_ = {extent, Interval{0.0, 0.0}};
  g.counts_ = {nodes, 1};
  return g;
}

Grid Grid::rectangle(Interval x1, Interval x2, std::size_t cells1,
                     std::size_t cells2) {
  check_extent(x1);
  check_extent(x2);
  if (cells1 < 2 || cells2 < 2)
    throw std::invalid_argument("2D grid needs at least 2 cells per axis");
  Grid g;
  g.dim_ = 2;
  g.extents_ = {x1, x2};
  g.counts_ = {cells1, cells2};
  return g;
}

std::size_t Grid::size() const { return counts_[0] * counts_[1]; }

double Grid::spacing(int axis) const {
  if (dim_ == 1) return extents_[0].length() / static_cast<double>(counts_[0] - 1);
  return extents_[axis].length() / static_cast<double>(counts_[axis]);
}

double Grid::measure() const {
  return dim_ == 1 ? extents_[0].length()
                   : extents_[0].length() * extents_[1].length();
}

double Grid::coordinate(int axis, std::size_t k) const {
  const double h = spacing(axis);
  if (dim_ == 1) {
    // Pin the last node to the exact right end.
    if (k + 1 == counts_[0]) return extents_[0].hi;
    return extents_[0].lo + static_cast<double>(k) * h;
  }
  return extents_[axis].lo + (static_cast<double>(k) + 0.5) * h;
}

std::array<std::size_t, 2> Grid::axis_indices(std::size_t index) const {
  if (dim_ == 1) return {index, 0};
  return {index / counts_[1], index % counts_[1]};
}

Point Grid::point(std::size_t index) const {
  const auto [i, j] = axis_indices(index);
  if (dim_ == 1) return {coordinate(0, i), 0.0};
  return {coordinate(0, i), coordinate(1, j)};
}

double Grid::weight(std::size_t index) const {
  if (dim_ == 1) {
    const double h = spacing(0);
    return (index == 0 || index + 1 == counts_[0]) ? 0.5 * h : h;
  }
  return spacing(0) * spacing(1);
}

std::vector<double> Grid::weights() const {
  std::vector<double> w(size());
  for (std::size_t p = 0; p < w.size(); ++p) w[p] = weight(p);
  return w;
}

bool Grid::contains(const Point& p, double slack) const {
  for (int a = 0; a < dim_; ++a) {
    const double tol = slack * std::max(1.0, extents_[a].length());
    if (p[a] < extents_[a].lo - tol || p[a] > extents_[a].hi + tol) return false;
  }
  return true;
}

Grid::Snap Grid::nearest(const Point& p) const {
  if (!contains(p)) throw std::out_of_range("point outside the grid domain");
  std::array<std::size_t, 2> idx{0, 0};
  for (int a = 0; a < dim_; ++a) {
    const double h = spacing(a);
    const double offset = dim_ == 1 ? 0.0 : 0.5;
    const double s = (p[a] - extents_[a].lo) / h - offset;
    // round half down so ties go to the lower index
    double k = std::ceil(s - 0.5);
    k = std::clamp(k, 0.0, static_cast<double>(counts_[a] - 1));
    idx[a] = static_cast<std::size_t>(k);
  }
  const std::size_t index = flat_index(idx[0], idx[1]);
  return {index, distance(point(index), p)};
}

double Grid::distance(const Point& a, const Point& b) const {
  double s = 0.0;
  for (int k = 0; k < dim_; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

Field::Field(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw std::invalid_argument("field value count does not match grid");
}

Field::Field(Grid grid, double fill)
    : grid_(std::move(grid)), values_(grid_.size(), fill) {}

Grid build_grid(int dimension, std::span<const Interval> extents,
                std::span<const std::size_t> counts) {
  if (dimension == 1) {
    if (extents.size() < 1 || counts.size() < 1)
      throw std::invalid_argument("missing 1D extent or count");
    return Grid::line(extents[0], counts[0]);
  }
  if (dimension == 2) {
    if (extents.size() < 2 || counts.size() < 2)
      throw std::invalid_argument("missing 2D extents or counts");
    return Grid::rectangle(extents[0], extents[1], counts[0], counts[1]);
  }
  throw std::invalid_argument("grid dimension must be 1 or 2");
}

double inner_product(const Field& f, const Field& g) {
  if (!(f.grid() == g.grid())) throw std::invalid_argument("fields live on different grids");
  const Grid& grid = f.grid();
  double s = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) s += grid.weight(p) * f[p] * g[p];
  return s;
}

namespace {

// Locate x on the sorted coordinate line of one axis: returns the lower
// index and the fractional position in [0, 1] towards the next one.
std::pair<std::size_t, double> bracket(const Grid& g, int axis, double x) {
  const std::size_t n = g.count(axis);
  const double first = g.coordinate(axis, 0);
  const double last = g.coordinate(axis, n - 1);
  if (x <= first) return {0, 0.0};
  if (x >= last) return {n - 2, 1.0};
  const double h = g.spacing(axis);
  auto k = static_cast<std::size_t>(std::floor((x - first) / h));
  k = std::min(k, n - 2);
  const double t = (x - g.coordinate(axis, k)) / h;
  return {k, std::clamp(t, 0.0, 1.0)};
}

}  // namespace

double interpolate(const Field& f, const Point& p) {
  const Grid& g = f.grid();
  if (!g.contains(p)) throw std::out_of_range("interpolation point outside domain");
  if (g.dimension() == 1) {
    const auto [k, t] = bracket(g, 0, p[0]);
    if (t == 0.0) return f[k];
    if (t == 1.0) return f[k + 1];
    return (1.0 - t) * f[k] + t * f[k + 1];
  }
  const auto [i, s] = bracket(g, 0, p[0]);
  const auto [j, t] = bracket(g, 1, p[1]);
  const double v00 = f[g.flat_index(i, j)];
  const double v10 = f[g.flat_index(i + 1, j)];
  const double v01 = f[g.flat_index(i, j + 1)];
  const double v11 = f[g.flat_index(i + 1, j + 1)];
  if (s == 0.0 && t == 0.0) return v00;
  return (1.0 - s) * (1.0 - t) * v00 + s * (1.0 - t) * v10 + (1.0 - s) * t * v01 +
         s * t * v11;
}

void write_field_csv(const Field& f, std::ostream& out) {
  const Grid& g = f.grid();
  io::Table t;
  t.header = g.dimension() == 1 ? std::vector<std::string>{"x", "value"}
                                : std::vector<std::string>{"x1", "x2", "value"};
  t.rows.reserve(f.size());
  for (std::size_t p = 0; p < f.size(); ++p) {
    const Point x = g.point(p);
    if (g.dimension() == 1)
      t.rows.push_back({x[0], f[p]});
    else
      t.rows.push_back({x[0], x[1], f[p]});
  }
  io::write_table(t, out);
}

void write_field_csv(const Field& f, const std::string& path) {
  auto out = io::open_for_write(path);
  write_field_csv(f, out);
}

Field read_field_csv(const Grid& grid, const std::string& path) {
  const io::Table t = io::read_table(path);
  const std::size_t value_col = static_cast<std::size_t>(grid.dimension());
  if (t.header.size() != value_col + 1 || t.rows.size() != grid.size())
    throw std::runtime_error("field CSV does not match grid: " + path);
  std::vector<double> values(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const Point x = grid.point(p);
    for (int a = 0; a < grid.dimension(); ++a)
      if (std::abs(t.rows[p][a] - x[a]) > 1e-9 * std::max(1.0, std::abs(x[a])))
        throw std::runtime_error("field CSV coordinates do not match grid: " + path);
    values[p] = t.rows[p][value_col];
  }
  return Field(grid, std::move(values));
}

}  // namespace condgpc
