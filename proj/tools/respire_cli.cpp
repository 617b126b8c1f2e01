#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "respire/respire.hpp"

namespace fs = std::filesystem;
using namespace respire;
using namespace respire::harness;

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kUsage = 2 };

int report_error(const char* kind, const std::string& message, int code) {
  nlohmann::json j{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  std::cerr << j.dump() << "\n";
  return code;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  fs::path out = "out";
  std::string format = "csv";
  unsigned threads = 1;
};

Format format_of(const Globals& g) { return g.format == "json" ? Format::Json : Format::Csv; }

ScenarioConfig load(const std::string& path, const Globals& g) {
  ScenarioConfig cfg = load_scenario(path);
  if (g.seed) cfg.seed = *g.seed;
  return cfg;
}

void prepare_out(const Globals& g) { fs::create_directories(g.out); }

int cmd_run(const Globals& g, const std::string& path, bool reference) {
  const ScenarioConfig cfg = load(path, g);
  EpisodeOptions opt;
  opt.flags = cfg.ablation;
  opt.reference = reference;
  const EpisodeResult res = run_episode(cfg, opt);
  prepare_out(g);
  const std::string name = fs::path(path).stem().string();
  write_metrics(g.out, name, to_string(variant_of(cfg.ablation)), cfg.seed, res.metrics, format_of(g));
  write_text(g.out / "trajectory.csv", trajectory_csv(res.trajectory));
  write_text(g.out / "timing.csv", timing_csv(res.trajectory));
  return kOk;
}

int cmd_ablate(const Globals& g, const std::string& path, const std::vector<std::string>& names,
               int trials, bool reference) {
  std::vector<Variant> variants;
  for (const auto& n : names) {
    const auto v = parse_variant(n);
    if (!v) throw ConfigError("unknown variant '" + n + "' (expected Van, Van+R, Van+H or Full)");
    variants.push_back(*v);
  }
  if (variants.empty()) variants = all_variants();
  if (trials < 1) throw ConfigError("--trials must be >= 1");
  const ScenarioConfig cfg = load(path, g);
  const AblationResult res = run_ablation(cfg, variants, trials, g.threads, reference);
  prepare_out(g);
  const std::string name = fs::path(path).stem().string();
  if (format_of(g) == Format::Csv) {
    write_text(g.out / "records.csv", ablation_records_csv(name, res));
    write_text(g.out / "summary.csv", ablation_summary_csv(res));
  } else {
    write_text(g.out / "records.json", ablation_records_json(name, res).dump(2) + "\n");
    write_text(g.out / "summary.json", ablation_summary_json(res).dump(2) + "\n");
  }
  return kOk;
}

int cmd_bench(const Globals& g, MiBenchConfig cfg, const std::string& sweep,
              const std::vector<std::string>& estimators) {
  const auto s = parse_sweep(sweep);
  if (!s) throw ConfigError("unknown sweep '" + sweep + "' (expected alpha or beta)");
  cfg.sweep = *s;
  cfg.estimators.clear();
  for (const auto& e : estimators) {
    const auto est = parse_estimator(e);
    if (!est) throw ConfigError("unknown estimator '" + e + "' (expected SP, SP-s, SP-st or MC)");
    cfg.estimators.push_back(*est);
  }
  if (cfg.values.empty()) throw ConfigError("--values must not be empty");
  for (double v : cfg.values) {
    if (!(v > 0.0)) throw ConfigError("--values must be > 0");
  }
  if (cfg.particles < 1) throw ConfigError("--particles must be >= 1");
  if (cfg.mc_samples < 2) throw ConfigError("--mc-samples must be >= 2");
  if (g.seed) cfg.seed = *g.seed;
  const auto rows = run_mi_bench(cfg);
  prepare_out(g);
  if (format_of(g) == Format::Csv) {
    write_text(g.out / "mi_bench.csv", mi_bench_csv(rows));
  } else {
    write_text(g.out / "mi_bench.json", mi_bench_json(rows).dump(2) + "\n");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Target search and tracking simulator with a reusable belief tree planner"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--format", g.format, "Metrics format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for ablate")
      ->check(CLI::Range(1u, 1024u))
      ->capture_default_str();

  std::string scenario;
  bool no_reference = false;
  auto* run = app.add_subcommand("run", "Run one closed-loop episode");
  run->fallthrough();
  run->add_option("scenario", scenario, "Scenario JSON")->required();
  run->add_flag("--no-reference", no_reference, "Skip the greedy baseline used for t_s");

  std::vector<std::string> variants;
  int trials = 1;
  bool reference = false;
  auto* ablate = app.add_subcommand("ablate", "Compare planner variants over shared seeds");
  ablate->fallthrough();
  ablate->add_option("scenario", scenario, "Scenario JSON")->required();
  ablate->add_option("--variants", variants, "Van, Van+R, Van+H, Full")->delimiter(',');
  ablate->add_option("--trials", trials, "Trials per variant")->capture_default_str();
  ablate->add_flag("--reference", reference, "Also run the greedy baseline for t_s");

  MiBenchConfig bench;
  std::string sweep = "alpha";
  std::vector<std::string> estimators{"SP", "SP-s", "SP-st", "MC"};
  auto* bench_mi = app.add_subcommand("bench-mi", "Entropy estimator sweep");
  bench_mi->fallthrough();
  bench_mi->add_option("--sweep", sweep, "alpha or beta")->capture_default_str();
  bench_mi->add_option("--values", bench.values, "Sweep values")->delimiter(',');
  auto* est_opt =
      bench_mi->add_option("--estimators", estimators, "SP, SP-s, SP-st, MC")->delimiter(',');
  est_opt->expected(0, -1);
  bench_mi->add_option("--particles", bench.particles)->capture_default_str();
  bench_mi->add_option("--mc-samples", bench.mc_samples)->capture_default_str();

  auto* validate = app.add_subcommand("validate", "Check a scenario file and exit");
  validate->fallthrough();
  validate->add_option("scenario", scenario, "Scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kUsage);
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*run) return cmd_run(g, scenario, !no_reference);
    if (*ablate) return cmd_ablate(g, scenario, variants, trials, reference);
    if (*bench_mi) return cmd_bench(g, bench, sweep, estimators);
    if (*validate) {
      load(scenario, g);
      return kOk;
    }
  } catch (const ConfigError& e) {
    return report_error("config", e.what(), kUsage);
  } catch (const DomainError& e) {
    return report_error("config", e.what(), kUsage);
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), kRuntime);
  }
  return kOk;
}
