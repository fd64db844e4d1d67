#pragma once
// Shared fixtures for the unit and acceptance tests.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "condgpc/gpc.hpp"
#include "condgpc/inference.hpp"

namespace condgpc::testing {

/// Surrogate u(x_k, xi) = b_k + (A xi)_k on a line grid with one node per row of A.
inline GpcSurrogate linear_stub(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const auto k = std::size_t(a.rows()), d = std::size_t(a.cols());
  const Grid g = Grid::line({0.0, 1.0}, std::max<std::size_t>(k, 2));
  auto set = total_degree_indices(d, 1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(Eigen::Index(g.size()), Eigen::Index(set.size()));
  c.topLeftCorner(a.rows(), 1) = b;
  c.topRightCorner(a.rows(), a.cols()) = a;
  return GpcSurrogate(g, set, c);
}

struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Posterior of xi under y = A xi + b + N(0, s^2 I), xi ~ N(m0, theta I).
inline Gaussian conjugate(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& y,
                          double s, const Eigen::VectorXd& m0, double theta) {
  const Eigen::MatrixXd prec =
      a.transpose() * a / (s * s) + Eigen::MatrixXd::Identity(a.cols(), a.cols()) / theta;
  const Eigen::MatrixXd cov = prec.inverse();
  return {cov * (a.transpose() * (y - b) / (s * s) + m0 / theta), cov};
}

/// Linear-stub posterior spec with observations at every stub node.
inline PosteriorSpec stub_posterior(const GpcSurrogate& s, const Eigen::VectorXd& y, double sigma,
                                    const Eigen::VectorXd& m0, double theta) {
  UObservations obs;
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    obs.locations.push_back(s.grid().point(std::size_t(k)));
    obs.values.push_back(y(k));
  }
  obs.sigma_delta = sigma;
  return make_posterior(s, obs, m0, theta);
}

/// Batch-means Monte Carlo standard error of the mean of f over all chains.
template <class F>
double batch_se(const PosteriorSamples& s, F f, std::size_t batches_per_chain = 25) {
  std::vector<double> means;
  const std::size_t n = s.retained(), len = n / batches_per_chain;
  for (std::size_t c = 0; c < s.chains; ++c)
    for (std::size_t b = 0; b < batches_per_chain; ++b) {
      double acc = 0.0;
      for (std::size_t t = b * len; t < (b + 1) * len; ++t) acc += f(s.states[c].row(Eigen::Index(t)));
      means.push_back(acc / double(len));
    }
  double m = 0.0;
  for (double v : means) m += v;
  m /= double(means.size());
  double var = 0.0;
  for (double v : means) var += (v - m) * (v - m);
  var /= double(means.size() - 1);
  return std::sqrt(var / double(means.size()));
}

}  // namespace condgpc::testing
