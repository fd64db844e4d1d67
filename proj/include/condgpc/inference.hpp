#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "condgpc/gpc.hpp"
#include "condgpc/grid.hpp"

namespace condgpc {

/// Point measurements of the state u.
struct UObservations {
  std::vector<Point> locations;
  std::vector<double> values;
  double sigma_delta = 1e-3;

  std::size_t size() const { return values.size(); }
};

/// Gaussian likelihood around the surrogate plus an isotropic Gaussian
/// prior N(xi_o, theta I):
///   log p = -sum_j (u_j - u_C(x_j, xi))^2 / (2 sigma_delta^2) - |xi - xi_o|^2 / (2 theta).
/// MAP estimation is then ridge-regularised least squares with
/// lambda = sigma_delta^2 / theta.
struct PosteriorSpec {
  PointProbe probe;
  UObservations observations;
  Eigen::VectorXd prior_mean;
  double theta = 1.0;

  std::size_t dimension() const { return static_cast<std::size_t>(prior_mean.size()); }
  double lambda() const { return observations.sigma_delta * observations.sigma_delta / theta; }
  double log_likelihood(std::span<const double> xi) const;
  double log_prior(std::span<const double> xi) const;
};

/// Builds the posterior with surrogate values precomputed at the observation
/// locations. An empty `prior_mean` means the origin.
PosteriorSpec make_posterior(const GpcSurrogate& s, UObservations obs,
                             Eigen::VectorXd prior_mean = {}, double theta = 1.0);

double log_posterior(const PosteriorSpec& spec, std::span<const double> xi);

enum class Proposal { DeMc, AdaptiveRw };

std::string to_string(Proposal p);
Proposal proposal_from_string(const std::string& s);

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t iterations = 20000;  // generations, burn-in included
  std::size_t burn_in = 10000;
  std::uint64_t seed = 0;
  Proposal proposal = Proposal::DeMc;
  /// Temper the likelihood during the first half of burn-in.
  bool anneal = true;
  std::size_t max_stall = 1000;
};

struct PosteriorSamples {
  std::size_t chains = 0;
  std::size_t dimension = 0;
  std::size_t burn_in = 0;
  std::vector<Eigen::MatrixXd> states;       // per chain: retained iterations x d
  std::vector<Eigen::VectorXd> log_post;     // per chain: retained iterations
  std::vector<double> acceptance;            // per chain, post burn-in
  Eigen::VectorXd rhat;
  Eigen::VectorXd best_xi;
  double best_log_post = 0.0;

  std::size_t retained() const { return states.empty() ? 0 : static_cast<std::size_t>(states[0].rows()); }
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
};

/// Multi-chain Metropolis sampler.
///
/// `DeMc` draws the difference vector from an archive of past chain states
/// (the archive variant of differential-evolution MCMC), which stays ergodic
/// with fewer chains than dimensions: xi' = xi_c + gamma (z_a - z_b) + e,
/// gamma = 2.38 / sqrt(2 d), or 1 with probability 0.1, e ~ N(0, 1e-12 I).
/// `AdaptiveRw` is a per-chain Gaussian random walk whose covariance is
/// learned from the chain history after burn_in / 2.
/// All chains advance in lock step from the previous generation, each with
/// its own counter-based stream, so results depend only on the seed.
PosteriorSamples sample_posterior(const PosteriorSpec& spec, const SamplerConfig& config);

struct MapEstimate {
  Eigen::VectorXd xi;
  double log_posterior = 0.0;
  double best_sample_log_posterior = 0.0;
  std::size_t iterations = 0;  // Levenberg-Marquardt steps
};

/// Best retained sample, optionally refined by coordinate-wise
/// golden-section ascent until a sweep gains less than 1e-10.
MapEstimate map_estimate(const PosteriorSamples& samples, const PosteriorSpec& spec, bool polish = true);
/// Levenberg-Marquardt on the least-squares form of -log posterior, started
/// from `start`; never returns a point worse than the start.
MapEstimate polish_map(const PosteriorSpec& spec, const Eigen::VectorXd& start, std::size_t max_iterations = 500);

struct RelativeError {
  Field error;
  double linf = 0.0;
  double l2 = 0.0;  // root mean square over the domain measure
};

RelativeError relative_error(const Field& kappa_ref, const Field& kappa_est);

/// Potential scale reduction per coordinate (chains are not split). The
/// pooled variance is W + B/n, so identical chains give exactly 1.
Eigen::VectorXd gelman_rubin(const std::vector<Eigen::MatrixXd>& chains);

/// Rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

void write_chains_csv(const PosteriorSamples& s, const std::string& path);
void write_map_json(const MapEstimate& m, const PosteriorSamples& s, const std::string& path);

}  // namespace condgpc
