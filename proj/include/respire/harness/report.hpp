#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "respire/harness/ablation.hpp"
#include "respire/harness/episode.hpp"
#include "respire/harness/mi_bench.hpp"

namespace respire::harness {

enum class Format { Csv, Json };

inline constexpr int kMetricsVersion = 1;

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }
inline std::string fmt_opt(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

inline const char* metrics_header() {
  return "version,scenario,variant,trial,seed,steps,found,steps_to_find,t_s,r_los,eps_est,t_tra,"
         "t_los,cycles,rollouts,reuses,nodes,stuck_events,blocked_moves,degenerate_events";
}

/// One metrics row. Timing is kept out so the row is reproducible per seed;
/// steps_to_find is "inf" when the target was never found.
inline std::string metrics_row(const std::string& scenario, const std::string& variant, int trial,
                               std::uint64_t seed, const EpisodeMetrics& m) {
  std::string s = std::to_string(kMetricsVersion) + "," + scenario + "," + variant + "," +
                  std::to_string(trial) + "," + std::to_string(seed) + "," +
                  std::to_string(m.steps) + "," + (m.steps_to_find ? "1" : "0") + "," +
                  (m.steps_to_find ? std::to_string(*m.steps_to_find) : "inf") + "," +
                  fmt_opt(m.t_s) + "," + fmt_opt(m.r_los) + "," + fmt_opt(m.eps_est) + "," +
                  std::to_string(m.t_tra) + "," + std::to_string(m.t_los) + "," +
                  std::to_string(m.cycles) + "," + std::to_string(m.rollouts) + "," +
                  std::to_string(m.reuses) + "," + std::to_string(m.nodes) + "," +
                  std::to_string(m.stuck_events) + "," + std::to_string(m.blocked_moves) + "," +
                  std::to_string(m.degenerate_events);
  return s;
}

inline nlohmann::json metrics_json(const std::string& scenario, const std::string& variant,
                                   int trial, std::uint64_t seed, const EpisodeMetrics& m) {
  using nlohmann::json;
  auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
  return json{{"version", kMetricsVersion},
              {"scenario", scenario},
              {"variant", variant},
              {"trial", trial},
              {"seed", seed},
              {"steps", m.steps},
              {"found", m.steps_to_find.has_value()},
              {"steps_to_find", opt(m.steps_to_find)},
              {"t_s", opt(m.t_s)},
              {"r_los", opt(m.r_los)},
              {"eps_est", opt(m.eps_est)},
              {"t_tra", m.t_tra},
              {"t_los", m.t_los},
              {"cycles", m.cycles},
              {"rollouts", m.rollouts},
              {"reuses", m.reuses},
              {"nodes", m.nodes},
              {"stuck_events", m.stuck_events},
              {"blocked_moves", m.blocked_moves},
              {"degenerate_events", m.degenerate_events}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline void write_metrics(const std::filesystem::path& dir, const std::string& scenario,
                          const std::string& variant, std::uint64_t seed, const EpisodeMetrics& m,
                          Format f) {
  if (f == Format::Csv) {
    write_text(dir / "metrics.csv", std::string(metrics_header()) + "\n" +
                                        metrics_row(scenario, variant, 0, seed, m) + "\n");
  } else {
    write_text(dir / "metrics.json", metrics_json(scenario, variant, 0, seed, m).dump(2) + "\n");
  }
}

/// One row per step; doubles use %.17g so the log re-parses bit-exactly.
inline std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
  std::string s =
      "step,robot_x,robot_y,robot_theta,target_x,target_y,estimate_x,estimate_y,measurement,"
      "range,bearing,stage,horizon,nodes,rollouts,reuses,stuck,degenerate\n";
  for (const auto& r : rows) {
    const bool det = r.measurement.is_detection();
    s += std::to_string(r.step) + "," + fmt(r.robot.x) + "," + fmt(r.robot.y) + "," +
         fmt(r.robot.theta) + "," + fmt(r.target.x()) + "," + fmt(r.target.y()) + "," +
         fmt(r.estimate.x()) + "," + fmt(r.estimate.y()) + "," + (det ? "detection" : "empty") +
         "," + (det ? fmt(r.measurement.range()) : "") + "," +
         (det ? fmt(r.measurement.bearing()) : "") + "," + to_string(r.stage) + "," +
         std::to_string(r.horizon) + "," + std::to_string(r.nodes) + "," +
         std::to_string(r.rollouts) + "," + std::to_string(r.reuses) + "," +
         (r.stuck ? "1" : "0") + "," + (r.degenerate ? "1" : "0") + "\n";
  }
  return s;
}

inline std::string timing_csv(const std::vector<TrajectoryRow>& rows) {
  std::string s = "step,plan_time_s\n";
  for (const auto& r : rows) s += std::to_string(r.step) + "," + fmt(r.plan_time_s) + "\n";
  return s;
}

inline std::string ablation_records_csv(const std::string& scenario, const AblationResult& res) {
  std::string s = std::string(metrics_header()) + "\n";
  for (const auto& r : res.records) {
    s += metrics_row(scenario, to_string(r.variant), r.trial, r.seed, r.metrics) + "\n";
  }
  return s;
}

inline nlohmann::json ablation_records_json(const std::string& scenario, const AblationResult& res) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : res.records) {
    a.push_back(metrics_json(scenario, to_string(r.variant), r.trial, r.seed, r.metrics));
  }
  return a;
}

/// Table II shape: search time and plan time, mean and std per variant.
inline std::string ablation_summary_csv(const AblationResult& res) {
  std::string s =
      "variant,trials,found,steps_to_find_mean,steps_to_find_std,plan_time_mean_s,"
      "plan_time_std_s,rollouts_per_cycle_mean,rollouts_mean,reuses_mean\n";
  for (const auto& v : res.summaries) {
    s += std::string(to_string(v.variant)) + "," + std::to_string(v.trials) + "," +
         std::to_string(v.found) + "," + fmt(v.steps_to_find.mean) + "," +
         fmt(v.steps_to_find.std) + "," + fmt(v.plan_time_s.mean) + "," +
         fmt(v.plan_time_s.std) + "," + fmt(v.rollouts_per_cycle.mean) + "," +
         fmt(v.rollouts.mean) + "," + fmt(v.reuses) + "\n";
  }
  return s;
}

inline nlohmann::json ablation_summary_json(const AblationResult& res) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& v : res.summaries) {
    a.push_back({{"variant", to_string(v.variant)},
                 {"trials", v.trials},
                 {"found", v.found},
                 {"steps_to_find_mean", v.steps_to_find.mean},
                 {"steps_to_find_std", v.steps_to_find.std},
                 {"plan_time_mean_s", v.plan_time_s.mean},
                 {"plan_time_std_s", v.plan_time_s.std},
                 {"rollouts_per_cycle_mean", v.rollouts_per_cycle.mean},
                 {"rollouts_mean", v.rollouts.mean},
                 {"reuses_mean", v.reuses}});
  }
  return a;
}

inline std::string mi_bench_csv(const std::vector<MiBenchRow>& rows) {
  std::string s = "estimator,sweep,param,entropy,abs_error_vs_mc,mc_standard_error,wall_time_ns\n";
  for (const auto& r : rows) {
    s += std::string(to_string(r.estimator)) + "," + to_string(r.sweep) + "," + fmt(r.param) +
         "," + fmt(r.entropy) + "," + fmt(r.abs_error_vs_mc) + "," + fmt(r.mc_standard_error) +
         "," + std::to_string(r.wall_time_ns) + "\n";
  }
  return s;
}

inline nlohmann::json mi_bench_json(const std::vector<MiBenchRow>& rows) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows) {
    a.push_back({{"estimator", to_string(r.estimator)},
                 {"sweep", to_string(r.sweep)},
                 {"param", r.param},
                 {"entropy", r.entropy},
                 {"abs_error_vs_mc", r.abs_error_vs_mc},
                 {"mc_standard_error", r.mc_standard_error},
                 {"wall_time_ns", r.wall_time_ns}});
  }
  return a;
}

}  // namespace respire::harness
