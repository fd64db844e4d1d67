// Command-line front end for the experiment pipeline.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "condgpc/io.hpp"
#include "condgpc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace condgpc;

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> sampler_seed;
  std::string strategy;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  unsigned threads = 0;
};

// Without --config or --preset, stage commands reuse <out>/config.json.
void add_common(CLI::App* cmd, Options& o) {
  auto* cfg = cmd->add_option("--config", o.config, "experiment JSON");
  auto* pre = cmd->add_option("--preset", o.preset, "named preset");
  cfg->excludes(pre);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--sampler-seed", o.sampler_seed, "sampler seed (keeps reference and observations)");
  cmd->add_option("--threads", o.threads, "worker threads for collocation solves");
}

ExperimentConfig resolve(const Options& o) {
  ExperimentConfig c;
  if (!o.config.empty()) c = load_config(o.config);
  else if (!o.preset.empty()) c = preset(o.preset);
  else if (fs::exists(fs::path(o.out) / "config.json")) c = load_config(fs::path(o.out) / "config.json");
  else throw std::invalid_argument("give --config or --preset (or run the kl stage first)");
  if (o.seed) c.seed = *o.seed;
  if (o.sampler_seed) c.sampler_seed = *o.sampler_seed;
  if (!o.strategy.empty()) c.u_strategy = o.strategy;
  if (o.threads) c.threads = o.threads;
  return config_from_json(config_to_json(c));  // validates
}

template <class F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

ConditionalKL reload_condition(const ExperimentConfig& c, const KLExpansion& kl, const fs::path& out) {
  const auto obs = load_observations(kl.grid, out / "condition" / "observations.csv");
  return stage_condition(c, kl, obs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional KL / gPC parameter estimation for steady diffusion"};
  app.require_subcommand(1);
  Options o;

  auto* presets = app.add_subcommand("presets", "list presets or print one as JSON");
  presets->add_option("--preset", o.preset, "preset to print");
  auto* kl = app.add_subcommand("kl", "compute the KL expansion");
  auto* cond = app.add_subcommand("condition", "draw the reference and condition on kappa data");
  auto* sur = app.add_subcommand("surrogate", "build the conditional gPC surrogate");
  auto* place = app.add_subcommand("place", "choose u measurement locations");
  auto* infer = app.add_subcommand("infer", "sample the posterior and estimate kappa");
  auto* run = app.add_subcommand("run", "run every stage");
  auto* cmp = app.add_subcommand("compare", "compare u placement strategies over seeds");
  for (auto* cmd : {kl, cond, sur, place, infer, run, cmp}) add_common(cmd, o);
  for (auto* cmd : {place, infer, run}) cmd->add_option("--strategy", o.strategy, "variance | uniform | random");
  cmp->add_option("--strategy", o.strategies, "strategies to compare (repeatable)")->required();
  cmp->add_option("--seeds", o.seeds, "master seeds")->delimiter(',')->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out(o.out);
    if (*presets) {
      if (o.preset.empty()) {
        for (const auto& n : preset_names()) std::cout << n << '\n';
      } else {
        std::cout << config_to_json(preset(o.preset)).dump(2) << '\n';
      }
      return 0;
    }
    const ExperimentConfig c = resolve(o);
    auto write_config = [&] {
      fs::create_directories(out);
      io::write_text(out / "config.json", config_to_json(c).dump(2) + "\n");
    };

    if (*run) {
      const auto r = run_pipeline(c, out);
      std::cout << "linf " << r.report["error"]["linf"] << "  l2 " << r.report["error"]["l2"]
                << "  report " << (out / "report.json").string() << '\n';
    } else if (*kl) {
      write_config();
      const auto k = stage("kl", [&] { return stage_kl(c); });
      save_kl(k, out / "kl");
      std::cout << k.size() << " modes, energy fraction " << k.energy_fraction() << '\n';
    } else if (*cond) {
      write_config();
      const auto k = stage("kl", [&] { return load_kl(out / "kl"); });
      const auto ref = stage("reference", [&] { return stage_reference(c, k); });
      save_reference(ref, out / "reference");
      const auto ckl = stage("condition", [&] {
        return stage_condition(c, k, stage_kappa_observations(c, k, ref));
      });
      save_condition(ckl, out / "condition");
      std::cout << ckl.observations.size() << " kappa observations, reduced dimension "
                << ckl.dimension() << '\n';
    } else if (*sur) {
      const auto k = stage("kl", [&] { return load_kl(out / "kl"); });
      const auto ckl = stage("condition", [&] { return reload_condition(c, k, out); });
      const auto s = stage("surrogate", [&] { return stage_surrogate(c, ckl); });
      save_surrogate(s, out / "surrogate");
      write_field_csv(s.mean(), (out / "surrogate" / "mean.csv").string());
      write_field_csv(s.variance(), (out / "surrogate" / "variance.csv").string());
      std::cout << s.indices().size() << " basis functions, " << s.rule_nodes() << " nodes\n";
    } else if (*place) {
      const auto s = stage("surrogate", [&] { return load_surrogate(out / "surrogate"); });
      const auto p = stage("place", [&] { return stage_place(c, s, c.u_strategy); });
      write_placement_csv(p, (out / "placement.csv").string());
      std::cout << p.size() << " locations (" << c.u_strategy << ")\n";
    } else if (*infer) {
      const auto k = stage("kl", [&] { return load_kl(out / "kl"); });
      const auto ref = stage("reference", [&] { return load_reference(k.grid, out / "reference"); });
      const auto ckl = stage("condition", [&] { return reload_condition(c, k, out); });
      const auto s = stage("surrogate", [&] { return load_surrogate(out / "surrogate"); });
      const auto p = stage("place", [&] { return read_placement_csv(k.grid, (out / "placement.csv").string()); });
      const auto r = stage("infer", [&] { return stage_infer(c, ckl, s, p, ref, c.u_strategy); });
      save_inference(r, out / "inference");
      io::write_text(out / "report.json", make_report(c, k, ckl, s, p, r, c.u_strategy).dump(2) + "\n");
      std::cout << "linf " << r.error.linf << "  l2 " << r.error.l2 << '\n';
    } else if (*cmp) {
      const auto result = compare_strategies(c, o.strategies, o.seeds, out);
      for (const auto& [strategy, v] : result.median_linf)
        std::cout << strategy << ": median linf " << v << ", median l2 " << result.median_l2.at(strategy) << '\n';
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
