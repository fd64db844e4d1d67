#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "condgpc/condkl.hpp"
#include "condgpc/forward.hpp"
#include "condgpc/gpc.hpp"
#include "condgpc/inference.hpp"
#include "condgpc/placement.hpp"
#include "condgpc/randfield.hpp"

namespace condgpc {

/// One synthetic experiment: reference field, kappa and u observations,
/// surrogate, sampler. Serialises to and from a single JSON document.
struct ExperimentConfig {
  std::string name = "custom";
  std::string problem = "custom";  // 1d | 2d-smooth | 2d-rough | custom

  int dimension = 1;
  std::vector<Interval> extents{{0.0, 1.0}};
  std::vector<std::size_t> counts{257};
  std::string kernel = "squared-exponential";  // or separable-exponential
  std::vector<double> lengths{0.05};
  double mu_k = 5.0;
  double sigma_k = 2.5;
  std::optional<std::size_t> kl_modes = 25;
  std::optional<double> kl_energy;
  double left = 0.0;   // Dirichlet values at x1 = lo / hi; other sides are no-flux
  double right = 2.0;

  std::string kappa_strategy = "uniform";  // random | uniform | critical
  std::size_t n_kappa = 20;
  std::size_t n_critical = 0;  // critical strategy: extrema of the reference, rest random
  double subset_tolerance = kDefaultSubsetTolerance;
  double nugget = 0.0;

  std::string u_strategy = "variance";  // variance | uniform | random
  std::size_t n_u = 6;
  double min_separation = 0.0;
  bool u_noise = false;
  double sigma_delta = 1e-3;
  double theta = 1.0;

  int degree = 3;
  std::string rule = "auto";  // auto | tensor | smolyak
  std::size_t rule_order = 0;  // q or level; 0 means degree + 1

  SamplerConfig sampler{};
  std::optional<std::uint64_t> sampler_seed;  // overrides the derived one
  bool polish = true;

  std::uint64_t seed = 1;
  unsigned threads = 1;
};

nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

Grid make_grid(const ExperimentConfig& c);
CovarianceKernel make_kernel(const ExperimentConfig& c);
BoundaryConditions make_boundary(const ExperimentConfig& c);
QuadratureRule make_rule(const ExperimentConfig& c, std::size_t d);

/// Failure inside a named pipeline stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct Reference {
  std::vector<double> xi;
  Field log_kappa;
  Field kappa;
  Field u;
};

struct InferenceResult {
  UObservations observations;
  std::optional<PosteriorSamples> samples;  // empty when d = 0
  MapEstimate map;
  Field kappa_est;
  RelativeError error;
  double kappa_match = 0.0;  // max relative mismatch at kappa observations
  double spearman = 0.0;     // rank correlation of error and u variance
};

KLExpansion stage_kl(const ExperimentConfig& c);
Reference stage_reference(const ExperimentConfig& c, const KLExpansion& kl);
KappaObservations stage_kappa_observations(const ExperimentConfig& c, const KLExpansion& kl,
                                           const Reference& ref);
ConditionalKL stage_condition(const ExperimentConfig& c, const KLExpansion& kl,
                              const KappaObservations& obs);
GpcSurrogate stage_surrogate(const ExperimentConfig& c, const ConditionalKL& ckl);
PlacementResult stage_place(const ExperimentConfig& c, const GpcSurrogate& s,
                            const std::string& strategy);
InferenceResult stage_infer(const ExperimentConfig& c, const ConditionalKL& ckl,
                            const GpcSurrogate& s, const PlacementResult& placement,
                            const Reference& ref, const std::string& strategy);

// Artifacts. Each stage directory lives under the run's output directory.
void save_kl(const KLExpansion& kl, const std::filesystem::path& dir);
KLExpansion load_kl(const std::filesystem::path& dir);
void save_reference(const Reference& r, const std::filesystem::path& dir);
Reference load_reference(const Grid& grid, const std::filesystem::path& dir);
void save_observations(const KappaObservations& obs, const Grid& grid, const std::filesystem::path& path);
KappaObservations load_observations(const Grid& grid, const std::filesystem::path& path);
void save_condition(const ConditionalKL& ckl, const std::filesystem::path& dir);
void save_inference(const InferenceResult& r, const std::filesystem::path& dir);

/// Deterministic summary of one run (no timings).
nlohmann::json make_report(const ExperimentConfig& c, const KLExpansion& kl,
                           const ConditionalKL& ckl, const GpcSurrogate& s,
                           const PlacementResult& placement, const InferenceResult& r,
                           const std::string& strategy);

struct RunResult {
  nlohmann::json report;
  std::map<std::string, double> timings;  // seconds per stage
  Reference reference;
  KappaObservations kappa_observations;
  std::optional<ConditionalKL> ckl;
  std::optional<GpcSurrogate> surrogate;
  std::map<std::string, InferenceResult> inference;  // per u strategy
};

/// Runs every stage. With an output directory, all artifacts plus
/// report.json and timings.json are written there; a failing stage
/// raises StageError after its predecessors' artifacts are on disk.
RunResult run_pipeline(const ExperimentConfig& c, const std::optional<std::filesystem::path>& out = {});

struct ComparisonRow {
  std::uint64_t seed;
  std::string strategy;
  double linf;
  double l2;
  double spearman;
  double kappa_match = 0.0;  // max relative mismatch at kappa observations for the MAP field
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::map<std::string, double> median_linf;
  std::map<std::string, double> median_l2;
};

/// For each seed the reference, kappa observations and surrogate are built
/// once and shared by all u-placement strategies.
Comparison compare_strategies(const ExperimentConfig& c, const std::vector<std::string>& strategies,
                              const std::vector<std::uint64_t>& seeds,
                              const std::optional<std::filesystem::path>& out = {});

void write_comparison_csv(const Comparison& cmp, const std::filesystem::path& path);

}  // namespace condgpc
