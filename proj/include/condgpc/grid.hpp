#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace condgpc {

/// A point in the physical domain. Only the first `Grid::dimension()`
/// components are meaningful.
using Point = std::array<double, 2>;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double length() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

/// Uniform tensor mesh on an interval (1D) or a rectangle (2D).
///
/// 1D grids store values on nodes (n nodes, n-1 elements) and use trapezoid
/// quadrature weights. 2D grids store values on cell centres and use the
/// cell area as the weight. In 2D the flat point index is `i * ny + j`, with
/// `i` along x1, so points are ordered lexicographically by (x1, x2).
class Grid {
 public:
  Grid() = default;

  static Grid line(Interval extent, std::size_t nodes);
  static Grid rectangle(Interval x1, Interval x2, std::size_t cells1,
                        std::size_t cells2);

  int dimension() const { return dim_; }
  const Interval& extent(int axis) const { return extents_[axis]; }
  /// Nodes (1D) or cells (2D) along an axis.
  std::size_t count(int axis) const { return counts_[axis]; }
  std::size_t size() const;
  double spacing(int axis) const;
  double measure() const;

  Point point(std::size_t index) const;
  double coordinate(int axis, std::size_t axis_index) const;
  double weight(std::size_t index) const;
  std::vector<double> weights() const;

  std::size_t flat_index(std::size_t i, std::size_t j = 0) const {
    return dim_ == 1 ? i : i * counts_[1] + j;
  }
  std::array<std::size_t, 2> axis_indices(std::size_t index) const;

  bool contains(const Point& p, double slack = 1e-12) const;

  struct Snap {
    std::size_t index;
    double distance;
  };
  /// Nearest grid point; ties go to the lower index.
  Snap nearest(const Point& p) const;

  double distance(const Point& a, const Point& b) const;

  bool operator==(const Grid&) const = default;

 private:
  int dim_ = 1;
  std::array<Interval, 2> extents_{};
  std::array<std::size_t, 2> counts_{0, 1};
};

/// Scalar values sampled on a grid.
class Field {
 public:
  Field() = default;
  Field(Grid grid, std::vector<double> values);
  explicit Field(Grid grid, double fill = 0.0);

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

 private:
  Grid grid_;
  std::vector<double> values_;
};

Grid build_grid(int dimension, std::span<const Interval> extents,
                std::span<const std::size_t> counts);

/// Discrete L2 inner product: sum_p w_p f_p g_p.
double inner_product(const Field& f, const Field& g);

/// Piecewise-linear (1D) or bilinear-from-cell-centres (2D) interpolation.
/// In 2D, points in the half-cell band along the boundary use the nearest
/// cell-centre line (constant extrapolation in the normal direction).
double interpolate(const Field& f, const Point& p);

/// Writes one row per point: coordinates, then value.
void write_field_csv(const Field& f, std::ostream& out);
void write_field_csv(const Field& f, const std::string& path);
/// Reads values back onto a known grid; coordinates must match.
Field read_field_csv(const Grid& grid, const std::string& path);

}  // namespace condgpc
