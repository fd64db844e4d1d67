#include "condgpc/inference.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "condgpc/io.hpp"
#include "condgpc/log.hpp"
#include "condgpc/rng.hpp"

namespace condgpc {

double PosteriorSpec::log_likelihood(std::span<const double> xi) const {
  if (observations.size() == 0) return 0.0;
  const Eigen::VectorXd u = probe.eval(xi);
  double ss = 0.0;
  for (std::size_t j = 0; j < observations.size(); ++j) {
    const double r = observations.values[j] - u[static_cast<long>(j)];
    ss += r * r;
  }
  return -ss / (2.0 * observations.sigma_delta * observations.sigma_delta);
}

double PosteriorSpec::log_prior(std::span<const double> xi) const {
  double ss = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const double r = xi[k] - prior_mean[static_cast<long>(k)];
    ss += r * r;
  }
  return -ss / (2.0 * theta);
}

PosteriorSpec make_posterior(const GpcSurrogate& s, UObservations obs, Eigen::VectorXd prior_mean,
                             double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("prior scale theta must be positive");
  if (!(obs.sigma_delta > 0.0)) throw std::invalid_argument("sigma_delta must be positive");
  if (obs.locations.size() != obs.values.size())
    throw std::invalid_argument("observation locations and values differ in length");
  if (prior_mean.size() == 0) prior_mean = Eigen::VectorXd::Zero(static_cast<long>(s.dimension()));
  if (static_cast<std::size_t>(prior_mean.size()) != s.dimension())
    throw std::invalid_argument("prior mean has the wrong dimension");
  PosteriorSpec spec;
  spec.probe = make_probe(s, obs.locations);
  spec.observations = std::move(obs);
  spec.prior_mean = std::move(prior_mean);
  spec.theta = theta;
  return spec;
}

double log_posterior(const PosteriorSpec& spec, std::span<const double> xi) {
  if (xi.size() != spec.dimension()) throw std::invalid_argument("xi has the wrong dimension");
  return spec.log_likelihood(xi) + spec.log_prior(xi);
}

std::string to_string(Proposal p) { return p == Proposal::DeMc ? "de-mc" : "adaptive-rw"; }

Proposal proposal_from_string(const std::string& s) {
  if (s == "de-mc") return Proposal::DeMc;
  if (s == "adaptive-rw") return Proposal::AdaptiveRw;
  throw std::invalid_argument("unknown proposal: " + s);
}

Eigen::VectorXd PosteriorSamples::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<long>(dimension));
  std::size_t n = 0;
  for (const auto& s : states) {
    m += s.colwise().sum().transpose();
    n += static_cast<std::size_t>(s.rows());
  }
  return n ? Eigen::VectorXd(m / double(n)) : m;
}

Eigen::MatrixXd PosteriorSamples::covariance() const {
  const Eigen::VectorXd m = mean();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<long>(dimension), static_cast<long>(dimension));
  std::size_t n = 0;
  for (const auto& s : states) {
    const Eigen::MatrixXd centred = s.rowwise() - m.transpose();
    c += centred.transpose() * centred;
    n += static_cast<std::size_t>(s.rows());
  }
  return n > 1 ? Eigen::MatrixXd(c / double(n - 1)) : c;
}

namespace {

struct ChainState {
  Eigen::VectorXd x;
  double loglik = 0.0;
  double logprior = 0.0;
};

// Running mean and covariance for the adaptive random walk.
struct RunningMoments {
  std::size_t n = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd m2;

  void add(const Eigen::VectorXd& x) {
    if (n == 0) {
      mean = Eigen::VectorXd::Zero(x.size());
      m2 = Eigen::MatrixXd::Zero(x.size(), x.size());
    }
    ++n;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / double(n);
    m2 += delta * (x - mean).transpose();
  }
  Eigen::MatrixXd covariance() const { return m2 / double(n - 1); }
};

}  // namespace

PosteriorSamples sample_posterior(const PosteriorSpec& spec, const SamplerConfig& config) {
  const std::size_t d = spec.dimension();
  const std::size_t nc = config.chains;
  if (d == 0) throw std::invalid_argument("nothing to sample: posterior dimension is zero");
  if (nc == 0) throw std::invalid_argument("need at least one chain");
  if (config.proposal == Proposal::DeMc && nc < 3)
    throw std::invalid_argument("de-mc needs at least 3 chains");
  if (config.iterations <= config.burn_in)
    throw std::invalid_argument("iterations must exceed burn-in");

  const long dl = static_cast<long>(d);
  const double sqrt_theta = std::sqrt(spec.theta);
  std::vector<Rng> rng;
  for (std::size_t c = 0; c < nc; ++c) rng.emplace_back(derive_seed(config.seed, c));
  Rng archive_rng(derive_seed(config.seed, "archive"));

  auto evaluate = [&](const Eigen::VectorXd& x) {
    ChainState s;
    s.x = x;
    const std::span<const double> xs(x.data(), d);
    s.loglik = spec.log_likelihood(xs);
    s.logprior = spec.log_prior(xs);
    return s;
  };

  // Archive of past states, seeded with prior draws; chains start on its first rows.
  const std::size_t initial = std::max<std::size_t>(10 * d, nc);
  std::vector<Eigen::VectorXd> archive;
  for (std::size_t m = 0; m < initial; ++m) {
    Eigen::VectorXd x(dl);
    for (long k = 0; k < dl; ++k) x[k] = spec.prior_mean[k] + sqrt_theta * archive_rng.normal();
    archive.push_back(std::move(x));
  }
  std::vector<ChainState> state;
  for (std::size_t c = 0; c < nc; ++c) state.push_back(evaluate(archive[c]));

  // Starting temperature: roughly unit misfit per observation at prior draws.
  const std::size_t anneal_end = config.anneal ? config.burn_in / 2 : 0;
  double t0 = 1.0;
  if (anneal_end > 0 && spec.observations.size() > 0) {
    std::vector<double> misfit;
    for (const auto& x : archive) misfit.push_back(-spec.log_likelihood({x.data(), d}));
    std::nth_element(misfit.begin(), misfit.begin() + long(misfit.size() / 2), misfit.end());
    t0 = std::max(1.0, misfit[misfit.size() / 2] / double(spec.observations.size()));
  }
  auto temperature = [&](std::size_t g) {
    if (g >= anneal_end || t0 == 1.0) return 1.0;
    return std::pow(t0, 1.0 - double(g) / double(anneal_end));
  };

  const double gamma = 2.38 / std::sqrt(2.0 * double(d));
  constexpr std::size_t kArchiveEvery = 10;

  // Adaptive random walk state.
  std::vector<RunningMoments> moments(nc);
  std::vector<double> log_scale(nc, std::log(0.1 * 2.38 * 2.38 / double(d)));
  const std::size_t adapt_start = config.burn_in / 2;

  PosteriorSamples out;
  out.chains = nc;
  out.dimension = d;
  out.burn_in = config.burn_in;
  const std::size_t kept = config.iterations - config.burn_in;
  out.states.assign(nc, Eigen::MatrixXd(static_cast<long>(kept), dl));
  out.log_post.assign(nc, Eigen::VectorXd(static_cast<long>(kept)));
  std::vector<std::size_t> accepted(nc, 0);

  std::size_t stall = 0;
  std::vector<ChainState> proposal(nc);
  for (std::size_t g = 0; g < config.iterations; ++g) {
    const double temp = temperature(g);
    if (g == config.burn_in) {
      // Drop archive entries gathered while tempered or far from equilibrium.
      const std::size_t keep = std::min(archive.size(), std::max<std::size_t>(10 * d, archive.size() / 2));
      archive.erase(archive.begin(), archive.end() - static_cast<long>(keep));
    }
    // During burn-in only the recent half of the archive feeds differences.
    const std::size_t lo = g < config.burn_in ? archive.size() / 2 : 0;
    const std::size_t span = archive.size() - lo;

    bool any = false;
    for (std::size_t c = 0; c < nc; ++c) {
      Rng& r = rng[c];
      Eigen::VectorXd x(dl);
      if (config.proposal == Proposal::DeMc) {
        std::size_t a = lo + r.below(span);
        std::size_t b = lo + r.below(span - 1);
        if (b >= a) ++b;
        const double gm = r.uniform() < 0.1 ? 1.0 : gamma;
        for (long k = 0; k < dl; ++k)
          x[k] = state[c].x[k] + gm * (archive[a][k] - archive[b][k]) + 1e-6 * r.normal();
      } else {
        Eigen::MatrixXd cov = spec.theta * Eigen::MatrixXd::Identity(dl, dl);
        if (moments[c].n > 2 * d) cov = moments[c].covariance();
        cov *= std::exp(log_scale[c]);
        cov.diagonal().array() += 1e-12;
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        Eigen::VectorXd z(dl);
        for (long k = 0; k < dl; ++k) z[k] = r.normal();
        x = state[c].x + llt.matrixL() * z;
      }
      proposal[c] = evaluate(x);
      const double log_ratio = (proposal[c].loglik - state[c].loglik) / temp +
                               (proposal[c].logprior - state[c].logprior);
      const bool accept = std::log(r.uniform()) < log_ratio;
      if (config.proposal == Proposal::AdaptiveRw && g < config.burn_in) {
        const double rate = std::min(1.0, std::exp(std::min(0.0, log_ratio)));
        log_scale[c] += (rate - 0.234) / std::pow(double(g + 1), 0.6);
      }
      if (!accept) proposal[c] = state[c];
      else {
        any = true;
        if (g >= config.burn_in) ++accepted[c];
      }
    }
    state.swap(proposal);  // synchronous: all chains moved from the previous generation

    if (config.proposal == Proposal::AdaptiveRw && g >= adapt_start)
      for (std::size_t c = 0; c < nc; ++c) moments[c].add(state[c].x);
    if ((g + 1) % kArchiveEvery == 0)
      for (const auto& s : state) archive.push_back(s.x);

    stall = any ? 0 : stall + 1;
    if (stall >= config.max_stall) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& s : state) best = std::max(best, s.loglik + s.logprior);
      std::ostringstream msg;
      msg << "sampler stalled: no chain accepted for " << stall << " generations (generation "
          << g << ", temperature " << temp << ", best log-posterior " << best << ")";
      throw std::runtime_error(msg.str());
    }
    if (g >= config.burn_in) {
      const long row = static_cast<long>(g - config.burn_in);
      for (std::size_t c = 0; c < nc; ++c) {
        out.states[c].row(row) = state[c].x.transpose();
        out.log_post[c][row] = state[c].loglik + state[c].logprior;
      }
    }
  }

  out.best_log_post = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < nc; ++c) {
    out.acceptance.push_back(double(accepted[c]) / double(kept));
    for (long i = 0; i < out.log_post[c].size(); ++i)
      if (out.log_post[c][i] > out.best_log_post) {
        out.best_log_post = out.log_post[c][i];
        out.best_xi = out.states[c].row(i).transpose();
      }
  }
  out.rhat = nc >= 2 ? gelman_rubin(out.states) : Eigen::VectorXd::Constant(dl, 1.0);
  double mean_rate = 0.0;
  for (double a : out.acceptance) mean_rate += a / double(nc);
  if (mean_rate < 0.1 || mean_rate > 0.6) {
    std::ostringstream msg;
    msg << "mean acceptance rate " << mean_rate << " is outside [0.1, 0.6]";
    warn(msg.str());
  }
  return out;
}

MapEstimate polish_map(const PosteriorSpec& spec, const Eigen::VectorXd& start, std::size_t max_iterations) {
  const long d = start.size();
  const long k = static_cast<long>(spec.observations.size());
  const double s = spec.observations.sigma_delta, rt = std::sqrt(spec.theta);
  Eigen::VectorXd y(k);
  for (long j = 0; j < k; ++j) y[j] = spec.observations.values[static_cast<std::size_t>(j)];
  Eigen::VectorXd m0 = spec.prior_mean.size() == d ? spec.prior_mean : Eigen::VectorXd::Zero(d);

  // Stacked residual r = [(u(xi) - y) / s; (xi - xi0) / sqrt(theta)], log posterior = -|r|^2 / 2.
  auto residual = [&](const Eigen::VectorXd& xi, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const std::span<const double> x(xi.data(), static_cast<std::size_t>(d));
    r.resize(k + d);
    if (k > 0) r.head(k) = (spec.probe.eval(x) - y) / s;
    r.tail(d) = (xi - m0) / rt;
    if (jac) {
      jac->resize(k + d, d);
      if (k > 0) jac->topRows(k) = spec.probe.jacobian(x) / s;
      jac->bottomRows(d) = Eigen::MatrixXd::Identity(d, d) / rt;
    }
  };

  MapEstimate m;
  m.xi = start;
  m.log_posterior = log_posterior(spec, {m.xi.data(), static_cast<std::size_t>(d)});
  m.best_sample_log_posterior = m.log_posterior;
  Eigen::VectorXd r, r_trial;
  Eigen::MatrixXd jac;
  double mu = 1e-3;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    residual(m.xi, r, &jac);
    const Eigen::MatrixXd h = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool accepted = false;
    Eigen::VectorXd step;
    while (mu < 1e12) {
      Eigen::MatrixXd damped = h;
      damped.diagonal() += mu * h.diagonal();
      step = damped.ldlt().solve(-g);
      const Eigen::VectorXd trial = m.xi + step;
      const double lp = log_posterior(spec, {trial.data(), static_cast<std::size_t>(d)});
      if (lp >= m.log_posterior) {
        const double gain = lp - m.log_posterior;
        m.xi = trial;
        m.log_posterior = lp;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = gain > 0.0 || step.norm() == 0.0;
        break;
      }
      mu *= 4.0;
    }
    m.iterations = it + 1;
    if (!accepted || step.norm() <= 1e-13 * (1.0 + m.xi.norm())) break;
  }
  return m;
}

MapEstimate map_estimate(const PosteriorSamples& samples, const PosteriorSpec& spec, bool polish) {
  if (samples.retained() == 0) throw std::invalid_argument("no retained samples");
  if (!polish) {
    MapEstimate m;
    m.xi = samples.best_xi;
    m.log_posterior = m.best_sample_log_posterior = samples.best_log_post;
    return m;
  }
  MapEstimate m = polish_map(spec, samples.best_xi);
  m.best_sample_log_posterior = samples.best_log_post;
  return m;
}

RelativeError relative_error(const Field& kappa_ref, const Field& kappa_est) {
  if (!(kappa_ref.grid() == kappa_est.grid())) throw std::invalid_argument("fields on different grids");
  const Grid& g = kappa_ref.grid();
  RelativeError r{Field(g, 0.0), 0.0, 0.0};
  double acc = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!(kappa_ref[p] > 0.0)) throw std::invalid_argument("reference conductivity must be positive");
    const double e = std::abs(kappa_est[p] - kappa_ref[p]) / kappa_ref[p];
    r.error[p] = e;
    r.linf = std::max(r.linf, e);
    acc += g.weight(p) * e * e;
  }
  r.l2 = std::sqrt(acc / g.measure());
  return r;
}

Eigen::VectorXd gelman_rubin(const std::vector<Eigen::MatrixXd>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("Gelman-Rubin needs at least two chains");
  const long n = chains[0].rows();
  const long d = chains[0].cols();
  if (n < 2) throw std::invalid_argument("Gelman-Rubin needs at least two samples per chain");
  const double m = double(chains.size());
  Eigen::MatrixXd means(static_cast<long>(chains.size()), d);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    if (chains[c].rows() != n || chains[c].cols() != d)
      throw std::invalid_argument("chains must have equal shapes");
    means.row(static_cast<long>(c)) = chains[c].colwise().mean();
    const Eigen::MatrixXd centred = chains[c].rowwise() - means.row(static_cast<long>(c));
    w += centred.array().square().colwise().sum().matrix().transpose() / double(n - 1);
  }
  w /= m;
  const Eigen::RowVectorXd grand = means.colwise().mean();
  const Eigen::VectorXd b =
      double(n) * (means.rowwise() - grand).array().square().colwise().sum().matrix().transpose() /
      (m - 1.0);
  Eigen::VectorXd r(d);
  for (long k = 0; k < d; ++k)
    r[k] = w[k] > 0.0 ? std::sqrt((w[k] + b[k] / double(n)) / w[k])
                      : (b[k] > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  return r;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("need two equal-length samples");
  const auto ra = ranks(a), rb = ranks(b);
  const double n = double(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

void write_chains_csv(const PosteriorSamples& s, const std::string& path) {
  io::Table t;
  t.header = {"iteration", "chain"};
  for (std::size_t k = 0; k < s.dimension; ++k) t.header.push_back("xi" + std::to_string(k + 1));
  t.header.push_back("log_posterior");
  for (std::size_t c = 0; c < s.chains; ++c)
    for (long i = 0; i < s.states[c].rows(); ++i) {
      std::vector<double> row{double(s.burn_in + static_cast<std::size_t>(i)), double(c)};
      for (long k = 0; k < s.states[c].cols(); ++k) row.push_back(s.states[c](i, k));
      row.push_back(s.log_post[c][i]);
      t.rows.push_back(std::move(row));
    }
  io::write_table(t, path);
}

void write_map_json(const MapEstimate& m, const PosteriorSamples& s, const std::string& path) {
  nlohmann::json j;
  j["xi"] = std::vector<double>(m.xi.data(), m.xi.data() + m.xi.size());
  j["log_posterior"] = m.log_posterior;
  j["best_sample_log_posterior"] = m.best_sample_log_posterior;
  j["polish_iterations"] = m.iterations;
  j["acceptance"] = s.acceptance;
  j["rhat"] = std::vector<double>(s.rhat.data(), s.rhat.data() + s.rhat.size());
  j["chains"] = s.chains;
  j["burn_in"] = s.burn_in;
  j["retained"] = s.retained();
  io::write_text(path, j.dump(2) + "\n");
}

}  // namespace condgpc
