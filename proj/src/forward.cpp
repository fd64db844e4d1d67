#include "condgpc/forward.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <stdexcept>
#include <string>

namespace condgpc {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

void check_positive(const Field& kappa) {
  for (double k : kappa.values())
    if (!(k > 0.0) || !std::isfinite(k))
      throw std::invalid_argument("conductivity must be positive and finite");
}

double harmonic_mean(double a, double b) { return 2.0 * a * b / (a + b); }

Eigen::VectorXd solve_spd(const SparseMatrix& a, const Eigen::VectorXd& b) {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("forward system is singular");
  Eigen::VectorXd x = ldlt.solve(b);
  if (ldlt.info() != Eigen::Success || !x.allFinite())
    throw std::runtime_error("forward solve failed");
  const double scale = std::max(b.norm(), (a * x).norm());
  const double residual = (a * x - b).norm();
  if (scale > 0.0 && residual > 1e-10 * scale)
    throw std::runtime_error("forward solve residual too large: " + std::to_string(residual / scale));
  return x;
}

}  // namespace

BoundaryConditions BoundaryConditions::left_right(double left, double right) {
  BoundaryConditions bc;
  bc[Side::Left] = BoundaryCondition::dirichlet(left);
  bc[Side::Right] = BoundaryCondition::dirichlet(right);
  return bc;
}

bool BoundaryConditions::has_dirichlet(int dimension) const {
  const int n = dimension == 1 ? 2 : 4;
  for (int s = 0; s < n; ++s)
    if (sides[s].kind == BoundaryCondition::Kind::Dirichlet) return true;
  return false;
}

Field solve_1d(const Field& kappa, const BoundaryConditions& bc) {
  const Grid& g = kappa.grid();
  if (g.dimension() != 1) throw std::invalid_argument("solve_1d needs a 1D grid");
  check_positive(kappa);
  if (!bc.has_dirichlet(1)) throw std::invalid_argument("1D problem needs a Dirichlet end");

  const std::size_t n = g.size();
  const double h = g.spacing(0);
  const auto& left = bc[Side::Left];
  const auto& right = bc[Side::Right];
  const bool fix_left = left.kind == BoundaryCondition::Kind::Dirichlet;
  const bool fix_right = right.kind == BoundaryCondition::Kind::Dirichlet;

  // Unknowns are the free nodes; Dirichlet nodes are eliminated.
  std::vector<long> unknown(n, -1);
  long m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((i == 0 && fix_left) || (i + 1 == n && fix_right)) continue;
    unknown[i] = m++;
  }
  std::vector<double> u(n, 0.0);
  if (fix_left) u[0] = left.value;
  if (fix_right) u[n - 1] = right.value;

  std::vector<Triplet> trips;
  trips.reserve(4 * n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double k = harmonic_mean(kappa[e], kappa[e + 1]) / h;
    const std::size_t nodes[2] = {e, e + 1};
    for (int a = 0; a < 2; ++a) {
      const long ra = unknown[nodes[a]];
      if (ra < 0) continue;
      for (int b = 0; b < 2; ++b) {
        const double kab = a == b ? k : -k;
        const long rb = unknown[nodes[b]];
        if (rb < 0)
          rhs[ra] -= kab * u[nodes[b]];
        else
          trips.emplace_back(ra, rb, kab);
      }
    }
  }
  // natural boundary: n . kappa u' = g contributes g at the node
  if (!fix_left) rhs[unknown[0]] += left.value;
  if (!fix_right) rhs[unknown[n - 1]] += right.value;

  SparseMatrix a(m, m);
  a.setFromTriplets(trips.begin(), trips.end());
  const Eigen::VectorXd x = solve_spd(a, rhs);
  for (std::size_t i = 0; i < n; ++i)
    if (unknown[i] >= 0) u[i] = x[unknown[i]];
  return Field(g, std::move(u));
}

Field solve_2d(const Field& kappa, const BoundaryConditions& bc) {
  const Grid& g = kappa.grid();
  if (g.dimension() != 2) throw std::invalid_argument("solve_2d needs a 2D grid");
  check_positive(kappa);
  if (!bc.has_dirichlet(2)) throw std::invalid_argument("2D problem needs a Dirichlet side");

  const std::size_t nx = g.count(0), ny = g.count(1);
  const double hx = g.spacing(0), hy = g.spacing(1);
  const double tx = hy / hx;  // face length over centre distance, x-faces
  const double ty = hx / hy;  // y-faces
  const std::size_t n = g.size();

  std::vector<Triplet> trips;
  trips.reserve(5 * n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<long>(n));
  std::vector<double> diag(n, 0.0);

  auto couple = [&](std::size_t p, std::size_t q, double t) {
    diag[p] += t;
    diag[q] += t;
    trips.emplace_back(p, q, -t);
    trips.emplace_back(q, p, -t);
  };
  auto boundary = [&](std::size_t p, const BoundaryCondition& c, double half_trans,
                      double face_len) {
    if (c.kind == BoundaryCondition::Kind::Dirichlet) {
      diag[p] += half_trans;
      rhs[p] += half_trans * c.value;
    } else {
      rhs[p] += c.value * face_len;
    }
  };

  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t p = g.flat_index(i, j);
      if (i + 1 < nx) {
        const std::size_t q = g.flat_index(i + 1, j);
        couple(p, q, tx * harmonic_mean(kappa[p], kappa[q]));
      }
      if (j + 1 < ny) {
        const std::size_t q = g.flat_index(i, j + 1);
        couple(p, q, ty * harmonic_mean(kappa[p], kappa[q]));
      }
      if (i == 0) boundary(p, bc[Side::Left], 2.0 * tx * kappa[p], hy);
      if (i + 1 == nx) boundary(p, bc[Side::Right], 2.0 * tx * kappa[p], hy);
      if (j == 0) boundary(p, bc[Side::Bottom], 2.0 * ty * kappa[p], hx);
      if (j + 1 == ny) boundary(p, bc[Side::Top], 2.0 * ty * kappa[p], hx);
    }
  }
  for (std::size_t p = 0; p < n; ++p) trips.emplace_back(p, p, diag[p]);

  SparseMatrix a(static_cast<long>(n), static_cast<long>(n));
  a.setFromTriplets(trips.begin(), trips.end());
  const Eigen::VectorXd x = solve_spd(a, rhs);
  return Field(g, std::vector<double>(x.data(), x.data() + x.size()));
}

Field solve(const Field& kappa, const BoundaryConditions& bc) {
  return kappa.grid().dimension() == 1 ? solve_1d(kappa, bc) : solve_2d(kappa, bc);
}

std::vector<double> axial_fluxes(const Field& kappa, const Field& u,
                                 const BoundaryConditions& bc) {
  const Grid& g = kappa.grid();
  if (!(g == u.grid())) throw std::invalid_argument("kappa and u on different grids");
  if (g.dimension() == 1) {
    const double h = g.spacing(0);
    std::vector<double> q(g.size() - 1);
    for (std::size_t e = 0; e + 1 < g.size(); ++e)
      q[e] = -harmonic_mean(kappa[e], kappa[e + 1]) * (u[e + 1] - u[e]) / h;
    return q;
  }
  const std::size_t nx = g.count(0), ny = g.count(1);
  const double hx = g.spacing(0), hy = g.spacing(1);
  std::vector<double> q(nx + 1, 0.0);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i <= nx; ++i) {
      double flux = 0.0;
      if (i == 0 || i == nx) {
        const std::size_t p = g.flat_index(i == 0 ? 0 : nx - 1, j);
        const auto& c = bc[i == 0 ? Side::Left : Side::Right];
        if (c.kind == BoundaryCondition::Kind::Dirichlet) {
          // half-cell difference to the boundary value
          const double du = i == 0 ? (u[p] - c.value) : (c.value - u[p]);
          flux = -2.0 * kappa[p] * du / hx * hy;
        } else {
          // outward normal is -x1 on the left, +x1 on the right
          flux = (i == 0 ? c.value : -c.value) * hy;
        }
      } else {
        const std::size_t p = g.flat_index(i - 1, j);
        const std::size_t r = g.flat_index(i, j);
        flux = -harmonic_mean(kappa[p], kappa[r]) * (u[r] - u[p]) / hx * hy;
      }
      q[i] += flux;
    }
  }
  return q;
}

}  // namespace condgpc
