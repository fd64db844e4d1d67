#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "condgpc/grid.hpp"

namespace condgpc {

/// exp(-sum_a (dx_a / L_a)^2). With equal lengths this is the isotropic
/// squared exponential in the Euclidean distance.
struct SquaredExponential {
  std::array<double, 2> length{1.0, 1.0};
};

/// exp(-|dx_1| / L_1 - |dx_2| / L_2).
struct SeparableExponential {
  std::array<double, 2> length{1.0, 1.0};
};

/// Unit-variance stationary covariance kernel. Both variants factor into a
/// product of one-dimensional kernels, one per axis.
class CovarianceKernel {
 public:
  using Variant = std::variant<SquaredExponential, SeparableExponential>;

  CovarianceKernel() = default;
  explicit CovarianceKernel(Variant v);

  static CovarianceKernel squared_exponential(double length);
  static CovarianceKernel squared_exponential(double l1, double l2);
  static CovarianceKernel separable_exponential(double l1, double l2);

  double operator()(const Point& x, const Point& y, int dimension) const;
  /// One-dimensional factor along `axis` for the separation `d`.
  double axis_factor(int axis, double d) const;
  double length(int axis) const;
  std::string name() const;
  const Variant& variant() const { return v_; }

 private:
  Variant v_ = SquaredExponential{};
};

struct LognormalMoments {
  double mu_g;
  double sigma_g;
};

/// Mean and standard deviation of ln(kappa) for a lognormal kappa with mean
/// mu_k and standard deviation sigma_k.
LognormalMoments lognormal_moments(double mu_k, double sigma_k);

/// How many modes to keep: the smallest count reaching an energy fraction,
/// or a fixed count.
struct KlTarget {
  std::optional<double> energy_fraction;
  std::optional<std::size_t> modes;

  static KlTarget energy(double fraction) { return {fraction, std::nullopt}; }
  static KlTarget fixed(std::size_t n) { return {std::nullopt, n}; }
};

enum class KlMethod { Auto, Dense, Kronecker };

/// Truncated Karhunen-Loeve expansion of a Gaussian field on a grid:
///   Y(x) = mean(x) + sigma_g * sum_n sqrt(lambda_n) eps_n(x) xi_n.
/// Eigenfunctions are orthonormal in the grid's discrete L2 product.
struct KLExpansion {
  Grid grid;
  CovarianceKernel kernel;
  Eigen::VectorXd mean;         // one value per grid point
  double sigma_g = 1.0;
  Eigen::VectorXd eigenvalues;  // retained, descending
  Eigen::MatrixXd modes;        // grid points x retained modes
  double total_energy = 0.0;    // sum of all (clipped) discrete eigenvalues

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
  double energy_fraction() const;
  double cumulative_fraction(std::size_t n) const;
  Field mode(std::size_t n) const;
  Field mean_field() const;
  /// sigma_g^2 * sum_n lambda_n eps_n(x)^2.
  Field variance_field() const;
};

/// Nystrom discretisation of the Fredholm eigenproblem using the grid's own
/// quadrature weights. `Kronecker` exploits the product structure of the
/// kernel and weights on 2D grids; `Auto` picks it for 2D.
KLExpansion compute_kl(const CovarianceKernel& kernel, const Grid& grid, double sigma_g,
                       const KlTarget& target, double mean = 0.0,
                       KlMethod method = KlMethod::Auto);

/// Y(x) for the given standard coordinates xi.
Field sample_realization(const KLExpansion& kl, std::span<const double> xi);

/// Full discrete spectrum (descending, clipped at zero) of the weighted
/// kernel matrix. Mostly for diagnostics and tests.
Eigen::VectorXd discrete_spectrum(const CovarianceKernel& kernel, const Grid& grid,
                                  KlMethod method = KlMethod::Auto);

void write_spectrum_csv(const KLExpansion& kl, const std::string& path);

}  // namespace condgpc
