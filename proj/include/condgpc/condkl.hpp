#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "condgpc/grid.hpp"
#include "condgpc/randfield.hpp"

namespace condgpc {

/// Exact point observations of Y = ln(kappa), snapped to grid points.
struct KappaObservations {
  std::vector<std::size_t> points;      // grid point indices
  std::vector<double> values;           // ln(kappa) at those points
  std::vector<double> snap_distance;    // distance moved when snapping
  std::vector<std::size_t> source;      // position in the caller's original list
  std::vector<std::size_t> dropped;     // original positions removed by subset selection

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Snaps each location to the nearest grid point.
KappaObservations observe_log_kappa(const Grid& grid, std::span<const Point> locations,
                                    std::span<const double> log_kappa);
/// Reads ln(kappa) from a known field at grid points.
KappaObservations observe_log_kappa(const Field& log_kappa, std::span<const std::size_t> points);

/// Default relative pivot threshold for `select_full_rank_subset`.
inline constexpr double kDefaultSubsetTolerance = 1e-5;

/// Greedy pivoted Cholesky of the observation covariance in the truncated
/// KL space. Observations whose residual variance falls below
/// `tolerance` times the first (largest) pivot are dropped.
KappaObservations select_full_rank_subset(const KLExpansion& kl, const KappaObservations& obs,
                                          double tolerance = kDefaultSubsetTolerance,
                                          double nugget = 0.0);

struct ConditionOptions {
  /// Variance added to the diagonal of the observation covariance.
  double nugget = 0.0;
  /// Reduced eigenvalues below this fraction of the largest are discarded.
  double reduced_cutoff = 1e-8;
};

/// Truncated KL expansion conditioned on exact observations of ln(kappa).
///
/// With G = sigma_g Lambda^{1/2} R (R_{n,i} = eps_n(x_i)) and Sigma = G^T G:
///   mu_tilde = G Sigma^{-1} (y - mean(x*)),
///   M_tilde  = I - G Sigma^{-1} G^T,
/// and the conditional mean is mean(x) + sigma_g sum_n sqrt(lambda_n) eps_n(x) mu_n.
/// The conditional field has the reduced expansion
///   Y(x) = cond_mean(x) + sigma_g sum_i sqrt(lambda~_i) eps~_i(x) xi_i
/// with (lambda~, V) the positive eigenpairs of Lambda^{1/2} M_tilde Lambda^{1/2}
/// and eps~_i = sum_n V_{n,i} eps_n.
struct ConditionalKL {
  KLExpansion base;
  KappaObservations observations;
  Eigen::MatrixXd sigma;              // N_m x N_m observation covariance (sigma_g^2 included)
  Eigen::MatrixXd r;                  // N_G x N_m
  Eigen::VectorXd mu_tilde;           // N_G
  Eigen::MatrixXd m_tilde;            // N_G x N_G
  Eigen::VectorXd mean;               // conditional mean, per grid point
  Eigen::VectorXd reduced_eigenvalues;  // d, descending
  Eigen::MatrixXd v;                  // N_G x d
  Eigen::MatrixXd reduced_modes;      // grid points x d

  std::size_t dimension() const { return static_cast<std::size_t>(reduced_eigenvalues.size()); }
  const Grid& grid() const { return base.grid; }
  double sigma_g() const { return base.sigma_g; }
  Field mean_field() const;
  Field reduced_mode(std::size_t i) const;
  /// Numerical rank of M_tilde (eigenvalues above `cutoff`).
  std::size_t projector_rank(double cutoff = 1e-8) const;
  /// Short deterministic hash of the defining data, for artifact metadata.
  std::string fingerprint() const;
};

ConditionalKL condition(const KLExpansion& kl, const KappaObservations& obs,
                        const ConditionOptions& options = {});

struct ConditionalSample {
  Field log_kappa;
  Field kappa;
};

ConditionalSample sample_conditional(const ConditionalKL& ckl, std::span<const double> xi);

/// sigma_g^2 sum_i lambda~_i eps~_i(x)^2.
Field conditional_variance_field(const ConditionalKL& ckl);

/// Reduced coordinates of a log-field lying in the conditional family; the
/// discrete L2 projection onto the reduced modes.
std::vector<double> project_to_reduced(const ConditionalKL& ckl, const Field& log_kappa);

void write_reduced_spectrum_csv(const ConditionalKL& ckl, const std::string& path);

}  // namespace condgpc
