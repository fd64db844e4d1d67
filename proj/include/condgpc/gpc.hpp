#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "condgpc/condkl.hpp"
#include "condgpc/forward.hpp"
#include "condgpc/grid.hpp"

namespace condgpc {

/// Orthonormal probabilists' Hermite polynomial phi_n(x).
double hermite(int n, double x);
/// phi_0(x) .. phi_p(x) into out[0..p].
void hermite_all(int p, double x, double* out);

/// Multi-indices with total degree <= P in graded-lexicographic order:
/// by degree, then with the leading components descending, e.g.
/// (0,0) (1,0) (0,1) (2,0) (1,1) (0,2).
struct MultiIndexSet {
  std::size_t dimension = 0;
  int degree = 0;
  std::vector<std::vector<int>> indices;

  std::size_t size() const { return indices.size(); }
  const std::vector<int>& operator[](std::size_t k) const { return indices[k]; }
  /// Position of `index`, or size() if absent.
  std::size_t find(std::span<const int> index) const;
};

MultiIndexSet total_degree_indices(std::size_t d, int P);

/// Phi_i(xi) for every index of the set.
Eigen::VectorXd evaluate_basis(const MultiIndexSet& set, std::span<const double> xi);
/// d Phi_k / d xi_j, basis x dimension.
Eigen::MatrixXd basis_jacobian(const MultiIndexSet& set, std::span<const double> xi);

/// Quadrature for the d-dimensional standard normal measure.
struct QuadratureRule {
  std::size_t dimension = 0;
  Eigen::MatrixXd nodes;  // d x M
  Eigen::VectorXd weights;
  std::string tag;        // "tensor-q<q>" or "smolyak-l<level>"

  std::size_t size() const { return static_cast<std::size_t>(weights.size()); }
  std::span<const double> node(std::size_t m) const {
    return {nodes.data() + m * dimension, dimension};
  }
};

/// q-point Gauss-Hermite rule (Golub-Welsch), symmetrised so the nodes are
/// exactly antisymmetric and the centre node of odd rules is exactly zero.
QuadratureRule gauss_hermite(std::size_t q);

inline constexpr std::size_t kDefaultNodeBudget = 1'000'000;

QuadratureRule gauss_hermite_tensor(std::size_t d, std::size_t q,
                                    std::size_t max_nodes = kDefaultNodeBudget);

/// Smolyak combination of Gauss-Hermite rules with 2i-1 points at level i.
/// Coinciding nodes are merged. Exact for total degree <= 2*level - 1.
QuadratureRule smolyak_sparse(std::size_t d, std::size_t level);

/// Tensor rule with q = P + 1 for d <= 6, Smolyak with level P + 1 above.
QuadratureRule default_rule(std::size_t d, int P);

/// u(x, xi): anything that maps reduced coordinates to a state field.
using ForwardMap = std::function<Field(std::span<const double>)>;

/// Conditional gPC surrogate u_C(x, xi) = sum_i c_i(x) Phi_i(xi).
class GpcSurrogate {
 public:
  GpcSurrogate() = default;
  /// `coefficients` is grid points x basis size.
  GpcSurrogate(Grid grid, MultiIndexSet indices, Eigen::MatrixXd coefficients,
               std::string rule_tag = "custom", std::size_t rule_nodes = 0,
               std::string ckl_fingerprint = "");

  const Grid& grid() const { return grid_; }
  const MultiIndexSet& indices() const { return indices_; }
  const Eigen::MatrixXd& coefficients() const { return coeffs_; }
  std::size_t dimension() const { return indices_.dimension; }
  int degree() const { return indices_.degree; }
  const std::string& rule_tag() const { return rule_tag_; }
  std::size_t rule_nodes() const { return rule_nodes_; }
  const std::string& ckl_fingerprint() const { return fingerprint_; }

  Field coefficient(std::size_t k) const;
  Field mean() const;
  Field variance() const;

  Field eval(std::span<const double> xi) const;
  double eval_at(const Point& x, std::span<const double> xi) const;

 private:
  Grid grid_;
  MultiIndexSet indices_;
  Eigen::MatrixXd coeffs_;
  std::string rule_tag_ = "custom";
  std::size_t rule_nodes_ = 0;
  std::string fingerprint_;
};

/// Surrogate restricted to a handful of locations: coefficient fields are
/// interpolated once, so each evaluation is a small polynomial sum.
struct PointProbe {
  MultiIndexSet indices;
  Eigen::MatrixXd coefficients;  // locations x basis

  Eigen::VectorXd eval(std::span<const double> xi) const;
  Eigen::MatrixXd jacobian(std::span<const double> xi) const;  // locations x dimension
};

PointProbe make_probe(const GpcSurrogate& s, std::span<const Point> locations);

/// c_i(x) = sum_m u(x, xi_m) Phi_i(xi_m) w_m. Forward evaluations run on up
/// to `threads` workers and are reduced in node order.
GpcSurrogate build_surrogate(const Grid& grid, const ForwardMap& forward, int P,
                             const QuadratureRule& rule, unsigned threads = 1);

/// Collocation over the conditional KL: kappa = exp(Y(xi)), u = solve(kappa).
GpcSurrogate build_surrogate(const ConditionalKL& ckl, const BoundaryConditions& bc, int P,
                             const QuadratureRule& rule, unsigned threads = 1);

/// Directory layout: indices.csv, coefficients/c<k>.csv, metadata.json.
void save_surrogate(const GpcSurrogate& s, const std::filesystem::path& dir);
GpcSurrogate load_surrogate(const std::filesystem::path& dir);

}  // namespace condgpc
