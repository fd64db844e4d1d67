#include "condgpc/condkl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "condgpc/io.hpp"
#include "condgpc/log.hpp"

namespace condgpc {

KappaObservations observe_log_kappa(const Grid& grid, std::span<const Point> locations,
                                    std::span<const double> log_kappa) {
  if (locations.size() != log_kappa.size())
    throw std::invalid_argument("observation locations and values differ in length");
  KappaObservations obs;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto snap = grid.nearest(locations[i]);
    obs.points.push_back(snap.index);
    obs.values.push_back(log_kappa[i]);
    obs.snap_distance.push_back(snap.distance);
    obs.source.push_back(i);
  }
  return obs;
}

KappaObservations observe_log_kappa(const Field& log_kappa, std::span<const std::size_t> points) {
  KappaObservations obs;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i] >= log_kappa.size()) throw std::out_of_range("observation point index");
    obs.points.push_back(points[i]);
    obs.values.push_back(log_kappa[points[i]]);
    obs.snap_distance.push_back(0.0);
    obs.source.push_back(i);
  }
  return obs;
}

namespace {

Eigen::MatrixXd eigen_at(const KLExpansion& kl, const KappaObservations& obs) {
  Eigen::MatrixXd r(kl.modes.cols(), static_cast<long>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i)
    r.col(static_cast<long>(i)) = kl.modes.row(static_cast<long>(obs.points[i])).transpose();
  return r;
}

KappaObservations subset(const KappaObservations& obs, const std::vector<std::size_t>& keep) {
  KappaObservations out;
  std::vector<bool> kept(obs.size(), false);
  for (std::size_t k : keep) {
    kept[k] = true;
    out.points.push_back(obs.points[k]);
    out.values.push_back(obs.values[k]);
    out.snap_distance.push_back(obs.snap_distance[k]);
    out.source.push_back(obs.source[k]);
  }
  out.dropped = obs.dropped;
  for (std::size_t k = 0; k < obs.size(); ++k)
    if (!kept[k]) out.dropped.push_back(obs.source[k]);
  std::sort(out.dropped.begin(), out.dropped.end());
  return out;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> mode, Eigen::Ref<Eigen::VectorXd> coeffs) {
  const double big = mode.cwiseAbs().maxCoeff();
  for (long p = 0; p < mode.size(); ++p) {
    if (std::abs(mode[p]) > 1e-8 * big) {
      if (mode[p] < 0.0) {
        mode *= -1.0;
        coeffs *= -1.0;
      }
      return;
    }
  }
}

}  // namespace

KappaObservations select_full_rank_subset(const KLExpansion& kl, const KappaObservations& obs,
                                          double tolerance, double nugget) {
  const std::size_t m = obs.size();
  if (m == 0) throw std::invalid_argument("subset selection needs at least one observation");
  const Eigen::MatrixXd g =
      kl.sigma_g * kl.eigenvalues.cwiseSqrt().asDiagonal() * eigen_at(kl, obs);
  Eigen::MatrixXd sigma = g.transpose() * g;
  sigma.diagonal().array() += nugget;

  Eigen::VectorXd residual = sigma.diagonal();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(static_cast<long>(m), static_cast<long>(m));
  std::vector<bool> used(m, false);
  std::vector<std::size_t> keep;
  double first_pivot = 0.0;
  for (std::size_t step = 0; step < m; ++step) {
    long best = -1;
    for (std::size_t j = 0; j < m; ++j)
      if (!used[j] && (best < 0 || residual[static_cast<long>(j)] > residual[best]))
        best = static_cast<long>(j);
    const double pivot = residual[best];
    if (step == 0) first_pivot = pivot;
    if (!(pivot > 0.0) || pivot < tolerance * first_pivot) break;
    used[best] = true;
    keep.push_back(static_cast<std::size_t>(best));
    const long k = static_cast<long>(step);
    const double root = std::sqrt(pivot);
    for (long j = 0; j < static_cast<long>(m); ++j) {
      if (used[j]) continue;
      const double dot = l.row(j).head(k).dot(l.row(best).head(k));
      l(j, k) = (sigma(j, best) - dot) / root;
      residual[j] -= l(j, k) * l(j, k);
    }
    l(best, k) = root;
  }
  if (keep.empty()) keep.push_back(0);
  if (keep.size() == 1 && m > 1)
    warn("observation covariance has numerical rank 1; keeping a single observation");
  std::sort(keep.begin(), keep.end());
  if (keep.size() < m) {
    std::ostringstream msg;
    msg << "subset selection dropped " << (m - keep.size()) << " of " << m
        << " kappa observations";
    warn(msg.str());
  }
  return subset(obs, keep);
}

Field ConditionalKL::mean_field() const {
  return Field(base.grid, std::vector<double>(mean.data(), mean.data() + mean.size()));
}

Field ConditionalKL::reduced_mode(std::size_t i) const {
  const auto col = reduced_modes.col(static_cast<long>(i));
  return Field(base.grid, std::vector<double>(col.data(), col.data() + col.size()));
}

std::size_t ConditionalKL::projector_rank(double cutoff) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_tilde, Eigen::EigenvaluesOnly);
  return static_cast<std::size_t>((es.eigenvalues().array() > cutoff).count());
}

std::string ConditionalKL::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  const std::size_t counts[2] = {base.grid.count(0), base.grid.count(1)};
  feed(counts, sizeof(counts));
  feed(&base.sigma_g, sizeof(double));
  feed(base.eigenvalues.data(), sizeof(double) * base.eigenvalues.size());
  feed(observations.points.data(), sizeof(std::size_t) * observations.points.size());
  feed(observations.values.data(), sizeof(double) * observations.values.size());
  feed(reduced_eigenvalues.data(), sizeof(double) * reduced_eigenvalues.size());
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

ConditionalKL condition(const KLExpansion& kl, const KappaObservations& obs,
                        const ConditionOptions& options) {
  const long n = static_cast<long>(kl.size());
  const long m = static_cast<long>(obs.size());
  if (m >= n && kl.sigma_g > 0.0)
    throw std::invalid_argument("need fewer kappa observations than KL modes");
  for (std::size_t i = 0; i < obs.size(); ++i)
    if (obs.points[i] >= kl.grid.size()) throw std::out_of_range("observation point index");

  ConditionalKL c;
  c.base = kl;
  c.observations = obs;
  c.r = eigen_at(kl, obs);

  const Eigen::VectorXd sqrt_lambda = kl.eigenvalues.cwiseSqrt();
  const Eigen::MatrixXd g = kl.sigma_g * sqrt_lambda.asDiagonal() * c.r;
  c.sigma = g.transpose() * g;
  c.sigma.diagonal().array() += options.nugget;

  Eigen::VectorXd resid(m);
  for (long i = 0; i < m; ++i) resid[i] = obs.values[i] - kl.mean[static_cast<long>(obs.points[i])];

  c.mu_tilde = Eigen::VectorXd::Zero(n);
  c.m_tilde = Eigen::MatrixXd::Identity(n, n);

  if (kl.sigma_g == 0.0) {
    // Deterministic field: nothing left to condition or sample.
    c.mean = kl.mean;
    c.reduced_eigenvalues.resize(0);
    c.v.resize(n, 0);
    c.reduced_modes.resize(kl.modes.rows(), 0);
    return c;
  }

  if (m > 0 && options.nugget == 0.0) {
    // Sigma = G^T G; the projector route via thin QR of G keeps M_tilde exactly
    // symmetric and idempotent and squares only sqrt(cond(Sigma)).
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, m);
    const Eigen::MatrixXd u =
        qr.matrixQR().topRows(m).triangularView<Eigen::Upper>().toDenseMatrix();
    const double umax = u.diagonal().cwiseAbs().maxCoeff();
    if (!(u.diagonal().cwiseAbs().minCoeff() > 1e-12 * umax))
      throw std::invalid_argument(
          "observation covariance is singular; run select_full_rank_subset first");
    const Eigen::VectorXd z = u.transpose().triangularView<Eigen::Lower>().solve(resid);
    c.mu_tilde = q * z;
    c.m_tilde -= q * q.transpose();
  } else if (m > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(c.sigma);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
      throw std::invalid_argument(
          "observation covariance is singular; run select_full_rank_subset first");
    c.mu_tilde = g * ldlt.solve(resid);
    c.m_tilde -= g * ldlt.solve(g.transpose());
    c.m_tilde = 0.5 * (c.m_tilde + c.m_tilde.transpose()).eval();
  }

  c.mean = kl.mean + kl.sigma_g * (kl.modes * sqrt_lambda.cwiseProduct(c.mu_tilde));

  const long expected = options.nugget == 0.0 ? n - m : n;
  if (m == 0) {
    c.reduced_eigenvalues = kl.eigenvalues;
    c.v = Eigen::MatrixXd::Identity(n, n);
  } else {
    const Eigen::MatrixXd b = sqrt_lambda.asDiagonal() * c.m_tilde * sqrt_lambda.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (b + b.transpose()));
    if (es.info() != Eigen::Success) throw std::runtime_error("reduced eigensolve failed");
    const Eigen::VectorXd values = es.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = es.eigenvectors().rowwise().reverse();
    const double top = std::max(values[0], 0.0);
    long d = 0;
    while (d < std::min(expected, n) && values[d] > options.reduced_cutoff * top) ++d;
    if (d < expected) {
      std::ostringstream msg;
      msg << "conditional covariance has numerical rank " << d << ", expected " << expected;
      warn(msg.str());
    }
    c.reduced_eigenvalues = values.head(d);
    c.v = vectors.leftCols(d);
  }
  c.reduced_modes = kl.modes * c.v;
  for (long i = 0; i < c.v.cols(); ++i) fix_sign(c.reduced_modes.col(i), c.v.col(i));
  return c;
}

ConditionalSample sample_conditional(const ConditionalKL& ckl, std::span<const double> xi) {
  if (xi.size() != ckl.dimension())
    throw std::invalid_argument("xi length does not match the reduced dimension");
  const Eigen::Map<const Eigen::VectorXd> x(xi.data(), static_cast<long>(xi.size()));
  Eigen::VectorXd y = ckl.mean;
  if (!xi.empty())
    y += ckl.sigma_g() *
         (ckl.reduced_modes * ckl.reduced_eigenvalues.cwiseSqrt().cwiseProduct(x));
  std::vector<double> yv(y.data(), y.data() + y.size());
  std::vector<double> kv(yv.size());
  std::transform(yv.begin(), yv.end(), kv.begin(), [](double v) { return std::exp(v); });
  return {Field(ckl.grid(), std::move(yv)), Field(ckl.grid(), std::move(kv))};
}

Field conditional_variance_field(const ConditionalKL& ckl) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(ckl.reduced_modes.rows());
  if (ckl.dimension() > 0)
    v = ckl.sigma_g() * ckl.sigma_g() *
        (ckl.reduced_modes.array().square().matrix() * ckl.reduced_eigenvalues);
  return Field(ckl.grid(), std::vector<double>(v.data(), v.data() + v.size()));
}

std::vector<double> project_to_reduced(const ConditionalKL& ckl, const Field& log_kappa) {
  if (!(log_kappa.grid() == ckl.grid())) throw std::invalid_argument("field on a different grid");
  const auto w = ckl.grid().weights();
  const long np = static_cast<long>(w.size());
  Eigen::VectorXd weighted(np);
  for (long p = 0; p < np; ++p) weighted[p] = w[p] * (log_kappa[p] - ckl.mean[p]);
  const Eigen::VectorXd coeff = ckl.reduced_modes.transpose() * weighted;
  std::vector<double> xi(ckl.dimension());
  for (std::size_t i = 0; i < xi.size(); ++i)
    xi[i] = coeff[static_cast<long>(i)] /
            (ckl.sigma_g() * std::sqrt(ckl.reduced_eigenvalues[static_cast<long>(i)]));
  return xi;
}

void write_reduced_spectrum_csv(const ConditionalKL& ckl, const std::string& path) {
  io::Table t;
  t.header = {"index", "eigenvalue"};
  for (long i = 0; i < ckl.reduced_eigenvalues.size(); ++i)
    t.rows.push_back({static_cast<double>(i + 1), ckl.reduced_eigenvalues[i]});
  io::write_table(t, path);
}

}  // namespace condgpc
