#pragma once

#include <array>
#include <vector>

#include "condgpc/grid.hpp"

namespace condgpc {

/// Boundary side of the domain. 1D problems use only Left and Right.
enum class Side { Left = 0, Right = 1, Bottom = 2, Top = 3 };

struct BoundaryCondition {
  enum class Kind { Dirichlet, Neumann };
  Kind kind = Kind::Neumann;
  /// Head value (Dirichlet) or prescribed n . kappa grad u (Neumann,
  /// n the outward normal).
  double value = 0.0;

  static BoundaryCondition dirichlet(double v) { return {Kind::Dirichlet, v}; }
  static BoundaryCondition neumann(double flux = 0.0) { return {Kind::Neumann, flux}; }
};

struct BoundaryConditions {
  std::array<BoundaryCondition, 4> sides{};

  BoundaryCondition& operator[](Side s) { return sides[static_cast<int>(s)]; }
  const BoundaryCondition& operator[](Side s) const { return sides[static_cast<int>(s)]; }

  /// Dirichlet at x = lo and x = hi, no-flux elsewhere.
  static BoundaryConditions left_right(double left, double right);
  bool has_dirichlet(int dimension) const;
};

/// Linear finite elements on the 1D node grid; the element conductivity is the
/// harmonic mean of its two nodal values.
Field solve_1d(const Field& kappa, const BoundaryConditions& bc);

/// Two-point flux finite volumes on the 2D cell grid with harmonic-mean face
/// transmissibilities.
Field solve_2d(const Field& kappa, const BoundaryConditions& bc);

/// Dispatches on the grid dimension.
Field solve(const Field& kappa, const BoundaryConditions& bc);

/// Discrete flux -kappa du/dx1 (positive in +x1) summed over each vertical
/// cut. 1D: one entry per element. 2D: one entry per column of x1-faces,
/// including the two boundary columns, so the result has nx + 1 entries.
std::vector<double> axial_fluxes(const Field& kappa, const Field& u,
                                 const BoundaryConditions& bc);

}  // namespace condgpc
