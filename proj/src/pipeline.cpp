#include "condgpc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <cmath>
#include <set>
#include <sstream>

#include "condgpc/io.hpp"
#include "condgpc/log.hpp"
#include "condgpc/rng.hpp"
#include "condgpc/serialize.hpp"

namespace condgpc {

namespace fs = std::filesystem;
using nlohmann::json;

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["problem"] = c.problem;
  json grid;
  grid["dimension"] = c.dimension;
  for (const auto& e : c.extents) grid["extents"].push_back({e.lo, e.hi});
  grid["counts"] = c.counts;
  j["grid"] = grid;
  j["kernel"] = {{"type", c.kernel}, {"lengths", c.lengths}};
  j["mu_k"] = c.mu_k;
  j["sigma_k"] = c.sigma_k;
  if (c.kl_modes) j["kl"]["modes"] = *c.kl_modes;
  if (c.kl_energy) j["kl"]["energy"] = *c.kl_energy;
  j["boundary"] = {{"left", c.left}, {"right", c.right}};
  j["kappa_observations"] = {{"strategy", c.kappa_strategy},
                             {"count", c.n_kappa},
                             {"critical", c.n_critical},
                             {"subset_tolerance", c.subset_tolerance},
                             {"nugget", c.nugget}};
  j["u_observations"] = {{"strategy", c.u_strategy},   {"count", c.n_u},
                         {"min_separation", c.min_separation}, {"noise", c.u_noise},
                         {"sigma_delta", c.sigma_delta}, {"theta", c.theta}};
  j["gpc"] = {{"degree", c.degree}, {"rule", c.rule}, {"order", c.rule_order}};
  j["sampler"] = {{"chains", c.sampler.chains},
                  {"iterations", c.sampler.iterations},
                  {"burn_in", c.sampler.burn_in},
                  {"proposal", to_string(c.sampler.proposal)},
                  {"anneal", c.sampler.anneal},
                  {"max_stall", c.sampler.max_stall},
                  {"polish", c.polish}};
  if (c.sampler_seed) j["sampler"]["seed"] = *c.sampler_seed;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.name = j.value("name", c.name);
  c.problem = j.value("problem", c.problem);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    c.dimension = g.value("dimension", c.dimension);
    if (g.contains("extents")) {
      c.extents.clear();
      for (const auto& e : g.at("extents")) c.extents.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    }
    if (g.contains("counts")) c.counts = g.at("counts").get<std::vector<std::size_t>>();
  }
  if (j.contains("kernel")) {
    c.kernel = j.at("kernel").value("type", c.kernel);
    if (j.at("kernel").contains("lengths")) c.lengths = j.at("kernel").at("lengths").get<std::vector<double>>();
  }
  c.mu_k = j.value("mu_k", c.mu_k);
  c.sigma_k = j.value("sigma_k", c.sigma_k);
  if (j.contains("kl")) {
    const auto& k = j.at("kl");
    c.kl_modes.reset();
    c.kl_energy.reset();
    if (k.contains("modes")) c.kl_modes = k.at("modes").get<std::size_t>();
    if (k.contains("energy")) c.kl_energy = k.at("energy").get<double>();
  }
  if (j.contains("boundary")) {
    c.left = j.at("boundary").value("left", c.left);
    c.right = j.at("boundary").value("right", c.right);
  }
  if (j.contains("kappa_observations")) {
    const auto& k = j.at("kappa_observations");
    c.kappa_strategy = k.value("strategy", c.kappa_strategy);
    c.n_kappa = k.value("count", c.n_kappa);
    c.n_critical = k.value("critical", c.n_critical);
    c.subset_tolerance = k.value("subset_tolerance", c.subset_tolerance);
    c.nugget = k.value("nugget", c.nugget);
  }
  if (j.contains("u_observations")) {
    const auto& u = j.at("u_observations");
    c.u_strategy = u.value("strategy", c.u_strategy);
    c.n_u = u.value("count", c.n_u);
    c.min_separation = u.value("min_separation", c.min_separation);
    c.u_noise = u.value("noise", c.u_noise);
    c.sigma_delta = u.value("sigma_delta", c.sigma_delta);
    c.theta = u.value("theta", c.theta);
  }
  if (j.contains("gpc")) {
    c.degree = j.at("gpc").value("degree", c.degree);
    c.rule = j.at("gpc").value("rule", c.rule);
    c.rule_order = j.at("gpc").value("order", c.rule_order);
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    c.sampler.chains = s.value("chains", c.sampler.chains);
    c.sampler.iterations = s.value("iterations", c.sampler.iterations);
    c.sampler.burn_in = s.value("burn_in", c.sampler.burn_in);
    c.sampler.proposal = proposal_from_string(s.value("proposal", to_string(c.sampler.proposal)));
    c.sampler.anneal = s.value("anneal", c.sampler.anneal);
    c.sampler.max_stall = s.value("max_stall", c.sampler.max_stall);
    c.polish = s.value("polish", c.polish);
    if (s.contains("seed")) c.sampler_seed = s.at("seed").get<std::uint64_t>();
  }
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);

  if (c.dimension != 1 && c.dimension != 2) throw std::invalid_argument("dimension must be 1 or 2");
  if (c.extents.size() != std::size_t(c.dimension) || c.counts.size() != std::size_t(c.dimension))
    throw std::invalid_argument("grid extents and counts must match the dimension");
  auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
      if (v == a) return true;
    return false;
  };
  if (!one_of(c.kappa_strategy, {"random", "uniform", "critical"}))
    throw std::invalid_argument("unknown kappa strategy: " + c.kappa_strategy);
  if (!one_of(c.u_strategy, {"variance", "uniform", "random"}))
    throw std::invalid_argument("unknown u strategy: " + c.u_strategy);
  if (!one_of(c.rule, {"auto", "tensor", "smolyak"})) throw std::invalid_argument("unknown gpc rule: " + c.rule);
  if (!one_of(c.kernel, {"squared-exponential", "separable-exponential"}))
    throw std::invalid_argument("unknown kernel: " + c.kernel);

  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  for (auto n : c.counts) require(n > 0, "grid counts must be positive");
  for (double l : c.lengths) require(l > 0.0, "correlation lengths must be positive");
  require(c.mu_k > 0.0 && c.sigma_k >= 0.0, "need mu_k > 0 and sigma_k >= 0");
  require(!c.kl_modes || *c.kl_modes > 0, "kl modes must be positive");
  require(!c.kl_energy || (*c.kl_energy > 0.0 && *c.kl_energy <= 1.0), "kl energy must be in (0, 1]");
  require(c.n_kappa > 0 && c.n_u > 0, "observation counts must be positive");
  require(c.n_critical <= c.n_kappa, "critical count exceeds kappa observations");
  require(c.sigma_delta > 0.0 && c.theta > 0.0, "sigma_delta and theta must be positive");
  require(c.degree >= 0, "gpc degree must be non-negative");
  require(c.sampler.chains >= 3, "the sampler needs at least three chains");
  require(c.sampler.iterations > c.sampler.burn_in, "iterations must exceed burn-in");
  return c;
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(json::parse(io::read_text(path))); }

std::vector<std::string> preset_names() {
  return {"1d-case1",        "1d-case2",       "1d-case3",       "2d-smooth-case1",
          "2d-smooth-case2", "2d-rough-case1", "2d-rough-case2", "1d-quick"};
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name.rfind("1d-", 0) == 0) {
    c.problem = "1d";
    c.dimension = 1;
    c.extents = {{0.0, 1.0}};
    c.counts = {257};
    c.kernel = "squared-exponential";
    c.lengths = {0.05};
    c.kl_modes = 25;
    c.left = 0.0;
    c.right = 2.0;
    c.n_kappa = 20;
    c.n_u = 6;
    c.seed = 11;
    if (name == "1d-case1") {
      c.kappa_strategy = "random";
    } else if (name == "1d-case2") {
      c.kappa_strategy = "uniform";
    } else if (name == "1d-case3") {
      c.kappa_strategy = "critical";
      c.n_critical = 15;
    } else if (name == "1d-quick") {
      c.counts = {129};
      c.kl_modes = 12;
      c.kappa_strategy = "uniform";
      c.n_kappa = 9;
      c.n_u = 4;
      c.degree = 2;
      c.sampler.iterations = 3000;
      c.sampler.burn_in = 1500;
    } else {
      throw std::invalid_argument("unknown preset: " + name);
    }
    return c;
  }
  c.dimension = 2;
  c.n_u = 10;
  c.seed = 21;
  if (name.rfind("2d-smooth-", 0) == 0) {
    c.problem = "2d-smooth";
    c.extents = {{0.0, 240.0}, {0.0, 60.0}};
    c.counts = {80, 20};
    c.kernel = "separable-exponential";
    c.lengths = {240.0, 100.0};
    c.kl_modes = 25;
    c.left = 50.0;
    c.right = 25.0;
    c.n_kappa = 20;
    if (name == "2d-smooth-case1") {
      c.kappa_strategy = "random";
    } else if (name == "2d-smooth-case2") {
      c.kappa_strategy = "critical";
      c.n_critical = 9;
    } else {
      throw std::invalid_argument("unknown preset: " + name);
    }
    return c;
  }
  if (name.rfind("2d-rough-", 0) == 0) {
    c.problem = "2d-rough";
    c.extents = {{0.0, 2.0}, {0.0, 1.0}};
    c.counts = {128, 64};
    c.kernel = "squared-exponential";
    c.lengths = {0.1, 0.1};
    c.kl_modes = 210;
    c.left = 2.0;
    c.right = 0.0;
    c.n_kappa = 205;
    c.seed = 31;
    if (name == "2d-rough-case1") {
      c.kappa_strategy = "random";
    } else if (name == "2d-rough-case2") {
      c.kappa_strategy = "critical";
      c.n_critical = 50;
    } else {
      throw std::invalid_argument("unknown preset: " + name);
    }
    return c;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

Grid make_grid(const ExperimentConfig& c) { return build_grid(c.dimension, c.extents, c.counts); }

CovarianceKernel make_kernel(const ExperimentConfig& c) {
  const double l1 = c.lengths.at(0);
  const double l2 = c.lengths.size() > 1 ? c.lengths[1] : l1;
  if (c.kernel == "squared-exponential") return CovarianceKernel::squared_exponential(l1, l2);
  if (c.kernel == "separable-exponential") return CovarianceKernel::separable_exponential(l1, l2);
  throw std::invalid_argument("unknown kernel: " + c.kernel);
}

BoundaryConditions make_boundary(const ExperimentConfig& c) {
  return BoundaryConditions::left_right(c.left, c.right);
}

QuadratureRule make_rule(const ExperimentConfig& c, std::size_t d) {
  const std::size_t order = c.rule_order ? c.rule_order : static_cast<std::size_t>(c.degree) + 1;
  if (c.rule == "tensor") return gauss_hermite_tensor(d, order);
  if (c.rule == "smolyak") return smolyak_sparse(d, order);
  if (c.rule == "auto") return d <= 6 ? gauss_hermite_tensor(d, order) : smolyak_sparse(d, order);
  throw std::invalid_argument("unknown quadrature rule: " + c.rule);
}

KLExpansion stage_kl(const ExperimentConfig& c) {
  const auto m = lognormal_moments(c.mu_k, c.sigma_k);
  const KlTarget target = c.kl_modes ? KlTarget::fixed(*c.kl_modes)
                                     : KlTarget::energy(c.kl_energy.value_or(0.95));
  return compute_kl(make_kernel(c), make_grid(c), m.sigma_g, target, m.mu_g);
}

Reference stage_reference(const ExperimentConfig& c, const KLExpansion& kl) {
  Reference r;
  Rng rng(derive_seed(c.seed, "reference"));
  for (std::size_t n = 0; n < kl.size(); ++n) r.xi.push_back(rng.normal());
  r.log_kappa = sample_realization(kl, r.xi);
  r.kappa = r.log_kappa;
  for (auto& v : r.kappa.values()) v = std::exp(v);
  r.u = solve(r.kappa, make_boundary(c));
  return r;
}

KappaObservations stage_kappa_observations(const ExperimentConfig& c, const KLExpansion& kl,
                                           const Reference& ref) {
  const Grid& g = kl.grid;
  if (c.n_kappa > g.size()) throw std::invalid_argument("more kappa observations than grid points");
  std::vector<std::size_t> points;
  const std::uint64_t seed = derive_seed(c.seed, "kappa-observations");
  if (c.kappa_strategy == "uniform") {
    points = baseline_locations(g, c.n_kappa, BaselineStrategy::Uniform).points;
  } else if (c.kappa_strategy == "random") {
    points = baseline_locations(g, c.n_kappa, BaselineStrategy::Random, seed).points;
  } else {
    // Most pronounced extrema (and saddles in 2D) of the reference first.
    auto crit = find_critical_points(ref.log_kappa, {true, true, true});
    const double mu = kl.mean.mean();
    std::stable_sort(crit.begin(), crit.end(), [&](const auto& a, const auto& b) {
      const double da = std::abs(a.value - mu), db = std::abs(b.value - mu);
      if (da != db) return da > db;
      return a.index < b.index;
    });
    const std::size_t take = std::min({c.n_critical, c.n_kappa, crit.size()});
    if (take < c.n_critical) warn("reference has fewer critical points than requested");
    std::set<std::size_t> chosen;
    for (std::size_t k = 0; k < take; ++k) {
      points.push_back(crit[k].index);
      chosen.insert(crit[k].index);
    }
    Rng rng(seed);
    std::vector<std::size_t> perm(g.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = 0; i < perm.size() && points.size() < c.n_kappa; ++i) {
      std::swap(perm[i], perm[i + rng.below(perm.size() - i)]);
      if (chosen.insert(perm[i]).second) points.push_back(perm[i]);
    }
  }
  const KappaObservations all = observe_log_kappa(ref.log_kappa, points);
  if (all.empty()) return all;
  return select_full_rank_subset(kl, all, c.subset_tolerance, c.nugget);
}

ConditionalKL stage_condition(const ExperimentConfig& c, const KLExpansion& kl,
                              const KappaObservations& obs) {
  ConditionOptions opt;
  opt.nugget = c.nugget;
  return condition(kl, obs, opt);
}

GpcSurrogate stage_surrogate(const ExperimentConfig& c, const ConditionalKL& ckl) {
  return build_surrogate(ckl, make_boundary(c), c.degree, make_rule(c, ckl.dimension()), c.threads);
}

PlacementResult stage_place(const ExperimentConfig& c, const GpcSurrogate& s, const std::string& strategy) {
  if (strategy == "variance") return select_locations(s.variance(), c.n_u, c.min_separation);
  if (strategy == "uniform") return baseline_locations(s.grid(), c.n_u, BaselineStrategy::Uniform);
  if (strategy == "random")
    return baseline_locations(s.grid(), c.n_u, BaselineStrategy::Random, derive_seed(c.seed, "u-random"));
  throw std::invalid_argument("unknown u strategy: " + strategy);
}

InferenceResult stage_infer(const ExperimentConfig& c, const ConditionalKL& ckl, const GpcSurrogate& s,
                            const PlacementResult& placement, const Reference& ref,
                            const std::string& strategy) {
  InferenceResult r;
  r.observations.sigma_delta = c.sigma_delta;
  Rng noise(derive_seed(c.seed, "u-noise"));
  for (auto p : placement.points) {
    r.observations.locations.push_back(ref.u.grid().point(p));
    double v = ref.u[p];
    if (c.u_noise) v += c.sigma_delta * noise.normal();
    r.observations.values.push_back(v);
  }
  const std::size_t d = ckl.dimension();
  if (d == 0) {
    r.map.xi = Eigen::VectorXd();
  } else {
    const PosteriorSpec spec = make_posterior(s, r.observations, {}, c.theta);
    SamplerConfig sc = c.sampler;
    sc.seed = c.sampler_seed ? *c.sampler_seed : derive_seed(c.seed, "sampler:" + strategy);
    r.samples = sample_posterior(spec, sc);
    r.map = map_estimate(*r.samples, spec, c.polish);
  }
  r.kappa_est = sample_conditional(ckl, {r.map.xi.data(), d}).kappa;
  r.error = relative_error(ref.kappa, r.kappa_est);
  const auto& obs = ckl.observations;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double k = std::exp(obs.values[i]);
    r.kappa_match = std::max(r.kappa_match, std::abs(r.kappa_est[obs.points[i]] - k) / k);
  }
  const Field var = s.variance();
  r.spearman = spearman(r.error.error.values(), var.values());
  return r;
}

// ---------------------------------------------------------------- artifacts

void save_kl(const KLExpansion& kl, const fs::path& dir) {
  fs::create_directories(dir);
  json meta;
  meta["grid"] = grid_to_json(kl.grid);
  json kernel;
  kernel["type"] = kl.kernel.name();
  kernel["lengths"] = {kl.kernel.length(0), kl.kernel.length(1)};
  meta["kernel"] = kernel;
  meta["sigma_g"] = kl.sigma_g;
  meta["modes"] = kl.size();
  meta["total_energy"] = kl.total_energy;
  meta["energy_fraction"] = kl.energy_fraction();
  io::write_text(dir / "metadata.json", meta.dump(2) + "\n");
  write_spectrum_csv(kl, (dir / "spectrum.csv").string());
  write_field_csv(kl.mean_field(), (dir / "mean.csv").string());
  io::Table t;
  for (std::size_t n = 0; n < kl.size(); ++n) t.header.push_back("mode" + std::to_string(n + 1));
  for (long p = 0; p < kl.modes.rows(); ++p) {
    std::vector<double> row(kl.modes.cols());
    for (long n = 0; n < kl.modes.cols(); ++n) row[n] = kl.modes(p, n);
    t.rows.push_back(std::move(row));
  }
  io::write_table(t, dir / "modes.csv");
}

KLExpansion load_kl(const fs::path& dir) {
  const auto meta = json::parse(io::read_text(dir / "metadata.json"));
  KLExpansion kl;
  kl.grid = grid_from_json(meta.at("grid"));
  const auto& k = meta.at("kernel");
  const auto len = k.at("lengths").get<std::vector<double>>();
  const std::string type = k.at("type").get<std::string>();
  kl.kernel = type == "separable-exponential" ? CovarianceKernel::separable_exponential(len[0], len[1])
                                              : CovarianceKernel::squared_exponential(len[0], len[1]);
  kl.sigma_g = meta.at("sigma_g").get<double>();
  kl.total_energy = meta.at("total_energy").get<double>();
  const Field mean = read_field_csv(kl.grid, (dir / "mean.csv").string());
  kl.mean = Eigen::Map<const Eigen::VectorXd>(mean.values().data(), static_cast<long>(mean.size()));
  const auto spec = io::read_table(dir / "spectrum.csv");
  kl.eigenvalues.resize(static_cast<long>(spec.rows.size()));
  for (std::size_t n = 0; n < spec.rows.size(); ++n) kl.eigenvalues[static_cast<long>(n)] = spec.rows[n].at(1);
  const auto modes = io::read_table(dir / "modes.csv");
  if (modes.rows.size() != kl.grid.size()) throw std::runtime_error("modes.csv does not match the grid");
  kl.modes.resize(static_cast<long>(kl.grid.size()), kl.eigenvalues.size());
  for (std::size_t p = 0; p < modes.rows.size(); ++p)
    for (long n = 0; n < kl.eigenvalues.size(); ++n) kl.modes(static_cast<long>(p), n) = modes.rows[p].at(n);
  return kl;
}

void save_reference(const Reference& r, const fs::path& dir) {
  fs::create_directories(dir);
  io::Table t;
  t.header = {"index", "xi"};
  for (std::size_t n = 0; n < r.xi.size(); ++n) t.rows.push_back({double(n + 1), r.xi[n]});
  io::write_table(t, dir / "xi_true.csv");
  write_field_csv(r.log_kappa, (dir / "log_kappa.csv").string());
  write_field_csv(r.kappa, (dir / "kappa.csv").string());
  write_field_csv(r.u, (dir / "u.csv").string());
}

Reference load_reference(const Grid& grid, const fs::path& dir) {
  Reference r;
  for (const auto& row : io::read_table(dir / "xi_true.csv").rows) r.xi.push_back(row.at(1));
  r.log_kappa = read_field_csv(grid, (dir / "log_kappa.csv").string());
  r.kappa = read_field_csv(grid, (dir / "kappa.csv").string());
  r.u = read_field_csv(grid, (dir / "u.csv").string());
  return r;
}

void save_observations(const KappaObservations& obs, const Grid& grid, const fs::path& path) {
  io::Table t;
  t.header = {"index"};
  if (grid.dimension() == 1) t.header.push_back("x");
  else t.header.insert(t.header.end(), {"x1", "x2"});
  t.header.insert(t.header.end(), {"log_kappa", "snap_distance", "source"});
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Point x = grid.point(obs.points[i]);
    std::vector<double> row{double(obs.points[i]), x[0]};
    if (grid.dimension() == 2) row.push_back(x[1]);
    row.insert(row.end(), {obs.values[i], obs.snap_distance[i], double(obs.source[i])});
    t.rows.push_back(std::move(row));
  }
  io::write_table(t, path);
  io::Table dropped;
  dropped.header = {"source"};
  for (auto s : obs.dropped) dropped.rows.push_back({double(s)});
  io::write_table(dropped, fs::path(path).replace_filename("dropped.csv"));
}

KappaObservations load_observations(const Grid& grid, const fs::path& path) {
  KappaObservations obs;
  const std::size_t off = grid.dimension() + 1;
  for (const auto& row : io::read_table(path).rows) {
    obs.points.push_back(static_cast<std::size_t>(row.at(0)));
    obs.values.push_back(row.at(off));
    obs.snap_distance.push_back(row.at(off + 1));
    obs.source.push_back(static_cast<std::size_t>(row.at(off + 2)));
  }
  const fs::path dropped = fs::path(path).replace_filename("dropped.csv");
  if (fs::exists(dropped))
    for (const auto& row : io::read_table(dropped).rows) obs.dropped.push_back(static_cast<std::size_t>(row.at(0)));
  return obs;
}

void save_condition(const ConditionalKL& ckl, const fs::path& dir) {
  fs::create_directories(dir);
  save_observations(ckl.observations, ckl.grid(), dir / "observations.csv");
  write_field_csv(ckl.mean_field(), (dir / "mean.csv").string());
  write_field_csv(conditional_variance_field(ckl), (dir / "variance.csv").string());
  write_reduced_spectrum_csv(ckl, (dir / "reduced_spectrum.csv").string());
}

void save_inference(const InferenceResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  io::Table t;
  const bool two = r.kappa_est.grid().dimension() == 2;
  t.header = two ? std::vector<std::string>{"x1", "x2", "u"} : std::vector<std::string>{"x", "u"};
  for (std::size_t j = 0; j < r.observations.size(); ++j) {
    std::vector<double> row{r.observations.locations[j][0]};
    if (two) row.push_back(r.observations.locations[j][1]);
    row.push_back(r.observations.values[j]);
    t.rows.push_back(std::move(row));
  }
  io::write_table(t, dir / "u_observations.csv");
  if (r.samples) {
    write_chains_csv(*r.samples, (dir / "chains.csv").string());
    write_map_json(r.map, *r.samples, (dir / "map.json").string());
  }
  write_field_csv(r.kappa_est, (dir / "kappa_est.csv").string());
  write_field_csv(r.error.error, (dir / "error.csv").string());
}

json make_report(const ExperimentConfig& c, const KLExpansion& kl, const ConditionalKL& ckl,
                 const GpcSurrogate& s, const PlacementResult& placement, const InferenceResult& r,
                 const std::string& strategy) {
  json j;
  j["name"] = c.name;
  j["problem"] = c.problem;
  j["seed"] = c.seed;
  j["u_strategy"] = strategy;
  j["kl"] = {{"modes", kl.size()},
             {"energy_fraction", kl.energy_fraction()},
             {"mu_g", kl.mean.size() ? kl.mean[0] : 0.0},
             {"sigma_g", kl.sigma_g}};
  j["kappa_observations"] = {{"requested", c.n_kappa},
                             {"retained", ckl.observations.size()},
                             {"dropped", ckl.observations.dropped}};
  j["reduced_dimension"] = ckl.dimension();
  j["surrogate"] = {{"degree", s.degree()},
                    {"rule", s.rule_tag()},
                    {"nodes", s.rule_nodes()},
                    {"basis_size", s.indices().size()},
                    {"ckl_fingerprint", s.ckl_fingerprint()}};
  json places = json::array();
  for (std::size_t k = 0; k < placement.size(); ++k) {
    const Point x = placement.grid.point(placement.points[k]);
    json p = {{"index", placement.points[k]}, {"score", placement.scores[k]},
              {"provenance", to_string(placement.provenance[k])}};
    p["x"] = placement.grid.dimension() == 1 ? json::array({x[0]}) : json::array({x[0], x[1]});
    places.push_back(p);
  }
  j["placement"] = places;
  if (r.samples) {
    const auto& smp = *r.samples;
    j["sampler"] = {{"proposal", to_string(c.sampler.proposal)},
                    {"chains", smp.chains},
                    {"iterations", c.sampler.iterations},
                    {"burn_in", smp.burn_in},
                    {"acceptance", smp.acceptance},
                    {"rhat", std::vector<double>(smp.rhat.data(), smp.rhat.data() + smp.rhat.size())}};
  }
  j["map"] = {{"xi", std::vector<double>(r.map.xi.data(), r.map.xi.data() + r.map.xi.size())},
              {"log_posterior", r.map.log_posterior},
              {"best_sample_log_posterior", r.map.best_sample_log_posterior}};
  j["error"] = {{"linf", r.error.linf}, {"l2", r.error.l2}};
  j["kappa_match_max_relative"] = r.kappa_match;
  j["spearman_error_vs_u_variance"] = r.spearman;
  return j;
}

namespace {

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

template <class F>
auto run_stage(const std::string& name, std::map<std::string, double>& timings, F&& f) {
  Timer t;
  try {
    auto r = f();
    timings[name] += t.seconds();
    return r;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

RunResult run_pipeline(const ExperimentConfig& c, const std::optional<fs::path>& out) {
  RunResult rr;
  auto& tm = rr.timings;
  if (out) {
    fs::create_directories(*out);
    io::write_text(*out / "config.json", config_to_json(c).dump(2) + "\n");
  }
  const KLExpansion kl = run_stage("kl", tm, [&] {
    auto k = stage_kl(c);
    if (out) save_kl(k, *out / "kl");
    return k;
  });
  rr.reference = run_stage("reference", tm, [&] {
    auto r = stage_reference(c, kl);
    if (out) save_reference(r, *out / "reference");
    return r;
  });
  rr.ckl = run_stage("condition", tm, [&] {
    rr.kappa_observations = stage_kappa_observations(c, kl, rr.reference);
    auto ckl = stage_condition(c, kl, rr.kappa_observations);
    if (out) save_condition(ckl, *out / "condition");
    return ckl;
  });
  rr.surrogate = run_stage("surrogate", tm, [&] {
    auto s = stage_surrogate(c, *rr.ckl);
    if (out) {
      save_surrogate(s, *out / "surrogate");
      write_field_csv(s.mean(), (*out / "surrogate" / "mean.csv").string());
      write_field_csv(s.variance(), (*out / "surrogate" / "variance.csv").string());
    }
    return s;
  });
  const PlacementResult placement = run_stage("place", tm, [&] {
    auto p = stage_place(c, *rr.surrogate, c.u_strategy);
    if (out) write_placement_csv(p, (*out / "placement.csv").string());
    return p;
  });
  auto& inf = rr.inference[c.u_strategy];
  inf = run_stage("infer", tm, [&] {
    auto r = stage_infer(c, *rr.ckl, *rr.surrogate, placement, rr.reference, c.u_strategy);
    if (out) save_inference(r, *out / "inference");
    return r;
  });
  rr.report = make_report(c, kl, *rr.ckl, *rr.surrogate, placement, inf, c.u_strategy);
  if (out) {
    io::write_text(*out / "report.json", rr.report.dump(2) + "\n");
    json t(tm);
    io::write_text(*out / "timings.json", t.dump(2) + "\n");
  }
  return rr;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Comparison compare_strategies(const ExperimentConfig& base, const std::vector<std::string>& strategies,
                              const std::vector<std::uint64_t>& seeds, const std::optional<fs::path>& out) {
  if (strategies.empty() || seeds.empty()) throw std::invalid_argument("need strategies and seeds");
  Comparison cmp;
  std::map<std::string, double> timings;
  for (auto seed : seeds) {
    ExperimentConfig c = base;
    c.seed = seed;
    const KLExpansion kl = run_stage("kl", timings, [&] { return stage_kl(c); });
    const Reference ref = run_stage("reference", timings, [&] { return stage_reference(c, kl); });
    const ConditionalKL ckl = run_stage("condition", timings, [&] {
      return stage_condition(c, kl, stage_kappa_observations(c, kl, ref));
    });
    const GpcSurrogate s = run_stage("surrogate", timings, [&] { return stage_surrogate(c, ckl); });
    for (const auto& strategy : strategies) {
      const auto placement = run_stage("place", timings, [&] { return stage_place(c, s, strategy); });
      const auto r = run_stage("infer", timings, [&] { return stage_infer(c, ckl, s, placement, ref, strategy); });
      cmp.rows.push_back({seed, strategy, r.error.linf, r.error.l2, r.spearman, r.kappa_match});
      if (out) {
        const fs::path dir = *out / ("seed-" + std::to_string(seed)) / strategy;
        fs::create_directories(dir);
        write_placement_csv(placement, (dir / "placement.csv").string());
        save_inference(r, dir);
        io::write_text(dir / "report.json", make_report(c, kl, ckl, s, placement, r, strategy).dump(2) + "\n");
      }
    }
  }
  for (const auto& strategy : strategies) {
    std::vector<double> linf, l2;
    for (const auto& row : cmp.rows)
      if (row.strategy == strategy) {
        linf.push_back(row.linf);
        l2.push_back(row.l2);
      }
    cmp.median_linf[strategy] = median(linf);
    cmp.median_l2[strategy] = median(l2);
  }
  if (out) {
    write_comparison_csv(cmp, *out / "comparison.csv");
    io::write_text(*out / "timings.json", json(timings).dump(2) + "\n");
  }
  return cmp;
}

void write_comparison_csv(const Comparison& cmp, const fs::path& path) {
  auto f = io::open_for_write(path);
  f << "seed,strategy,linf,l2,spearman\n";
  for (const auto& r : cmp.rows)
    f << r.seed << ',' << r.strategy << ',' << io::format_double(r.linf) << ',' << io::format_double(r.l2)
      << ',' << io::format_double(r.spearman) << '\n';
  for (const auto& [strategy, v] : cmp.median_linf)
    f << "median," << strategy << ',' << io::format_double(v) << ','
      << io::format_double(cmp.median_l2.at(strategy)) << ",\n";
}

}  // namespace condgpc
