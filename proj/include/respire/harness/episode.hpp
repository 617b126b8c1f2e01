#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "respire/harness/scenario.hpp"

namespace respire::harness {

enum class Stage { Search, Tracking };

inline const char* to_string(Stage s) { return s == Stage::Search ? "search" : "tracking"; }

/// Independent generator per concern so that planner variants never perturb
/// the ground truth drawn for a seed.
enum class Stream : std::uint64_t { Truth = 1, Planner = 2, Initial = 3 };

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

struct EpisodeOptions {
  AblationFlags flags;
  bool nbv = false;        // depth-1 greedy baseline
  bool reference = false;  // also run the NBV baseline to report t_s
};

struct CycleOutcome {
  PlanResult plan;
  Vec2 goal = Vec2::Zero();
  std::size_t planning_particles = 0;
};

/// One planning cycle: optional particle hierarchy, then a tree search with
/// the MI reward over the (possibly simplified) belief. The reported wall time
/// covers the whole cycle.
inline CycleOutcome plan_cycle(const ScenarioConfig& cfg, const OccupancyGrid& known,
                               const RobotPose& robot, const ParticleBelief& belief,
                               const Measurement& last, Stage stage, const EpisodeOptions& opt,
                               Rng& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  CycleOutcome out;
  JointBeliefState root{robot, belief};
  if (opt.flags.hierarchy) {
    HierarchyOutput h = particle_hierarchy(belief, robot, known, cfg.hierarchy);
    root.belief = std::move(h.simplified);
    out.goal = h.goal.point;
  } else {
    const auto heaviest = std::max_element(belief.weights.begin(), belief.weights.end());
    out.goal = belief.states[static_cast<std::size_t>(heaviest - belief.weights.begin())];
  }
  out.planning_particles = root.belief.size();

  PlannerConfig pc = cfg.planner;
  pc.recycling = opt.flags.recycling;
  pc.horizon = opt.nbv ? 1 : (stage == Stage::Search ? cfg.horizon_search : cfg.horizon_tracking);
  if (stage == Stage::Tracking && last.is_detection()) {
    pc.standoff = cfg.tracking_standoff;
    pc.tie_tolerance = cfg.tracking_tie_tolerance;
  }

  PlanningContext ctx;
  ctx.models = cfg.models;
  ctx.goal = out.goal;
  ctx.field = std::make_shared<const DistanceField>(known, cfg.models.robot_radius, out.goal);
  ctx.root_observation = last;
  const MiConfig mi = cfg.mi;
  const ModelConfig models = cfg.models;
  ctx.reward = [&known, mi, models](const JointBeliefState& s, const RobotControl& a) {
    return mi_reward(s, a, known, models, mi);
  };
  out.plan = build_tree(known, root, pc, std::move(ctx), rng);
  out.plan.diagnostics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

struct TrajectoryRow {
  int step = 0;
  RobotPose robot;
  Vec2 target = Vec2::Zero();
  Vec2 estimate = Vec2::Zero();
  Measurement measurement;
  Stage stage = Stage::Search;
  int horizon = 0;
  std::size_t nodes = 0;
  std::size_t rollouts = 0;
  std::size_t reuses = 0;
  bool stuck = false;
  bool degenerate = false;
  double plan_time_s = 0.0;
};

struct EpisodeMetrics {
  int steps = 0;                      // simulated steps
  std::optional<int> steps_to_find;   // absent = never found
  std::optional<int> t_s;             // vs the NBV reference
  std::optional<double> r_los;        // absent when T_tra = 0
  std::optional<double> eps_est;      // absent when T_tra = 0
  int t_tra = 0;
  int t_los = 0;
  std::size_t cycles = 0;
  std::size_t rollouts = 0;
  std::size_t reuses = 0;
  std::size_t nodes = 0;
  std::size_t stuck_events = 0;
  std::size_t blocked_moves = 0;
  std::size_t degenerate_events = 0;
  std::vector<double> plan_times;

  double rollouts_per_cycle() const {
    return cycles == 0 ? 0.0 : static_cast<double>(rollouts) / static_cast<double>(cycles);
  }
  double mean_plan_time() const {
    if (plan_times.empty()) return 0.0;
    double s = 0.0;
    for (double t : plan_times) s += t;
    return s / static_cast<double>(plan_times.size());
  }
  double median_plan_time() const {
    if (plan_times.empty()) return 0.0;
    std::vector<double> v = plan_times;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
  }
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::vector<TrajectoryRow> trajectory;
};

inline double planar_error(const Vec2& a, const Vec2& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  return std::sqrt(dx * dx + dy * dy);
}

/// Closed-loop receding-horizon episode: sense, filter, plan, act, move the
/// target. Deterministic for a given scenario and seed.
inline EpisodeResult run_episode(const ScenarioConfig& cfg, const EpisodeOptions& opt = {}) {
  EpisodeResult res;
  EpisodeMetrics& m = res.metrics;
  Rng truth_rng = make_rng(cfg.seed, Stream::Truth);
  Rng plan_rng = make_rng(cfg.seed, Stream::Planner);
  Rng init_rng = make_rng(cfg.seed, Stream::Initial);

  const OccupancyGrid& truth = cfg.truth;
  OccupancyGrid known(truth.width(), truth.height(), truth.resolution(), truth.origin(),
                      Cell::Unknown);
  const MeasurementNoise noise(cfg.models.noise.measurement);
  const MotionChecker truth_motion(truth, cfg.models);
  RobotPose robot = cfg.robot_start;
  TargetMover target(cfg.target);
  ParticleBelief belief = sample_initial_belief(cfg, init_rng);
  Stage stage = Stage::Search;
  double err_sum = 0.0;

  for (int k = 0; k < cfg.steps; ++k) {
    known = update_map(known, robot, cfg.lidar, truth);
    const Measurement z = observe(robot, target.position(), cfg.models.camera, truth, noise, truth_rng);
    FilterStepConfig fc;
    fc.predict = k > 0;
    FilterStepResult fs = filter_step(belief, z, robot, cfg.models.camera, known,
                                      cfg.models.noise.process, noise, plan_rng, fc);
    belief = std::move(fs.belief);
    m.degenerate_events += fs.degenerate ? 1 : 0;

    if (z.is_detection() && stage == Stage::Search) {
      stage = Stage::Tracking;
      m.steps_to_find = k;
    }
    TrajectoryRow row;
    row.step = k;
    row.robot = robot;
    row.target = target.position();
    row.estimate = mean_estimate(belief);
    row.measurement = z;
    row.stage = stage;
    row.degenerate = fs.degenerate;
    if (stage == Stage::Tracking) {
      ++m.t_tra;
      if (z.is_empty()) ++m.t_los;
      err_sum += planar_error(row.estimate, row.target);
    }
    m.steps = k + 1;
    if (stage == Stage::Tracking && cfg.stop_on_find) {
      res.trajectory.push_back(row);
      break;
    }

    const CycleOutcome cycle = plan_cycle(cfg, known, robot, belief, z, stage, opt, plan_rng);
    const PlanDiagnostics& d = cycle.plan.diagnostics;
    row.horizon = d.horizon;
    row.nodes = d.nodes;
    row.rollouts = d.rollouts;
    row.reuses = d.reuses;
    row.stuck = cycle.plan.stuck;
    row.plan_time_s = d.wall_time_s;
    ++m.cycles;
    m.rollouts += d.rollouts;
    m.reuses += d.reuses;
    m.nodes += d.nodes;
    m.plan_times.push_back(d.wall_time_s);
    res.trajectory.push_back(row);

    if (cycle.plan.stuck) {
      ++m.stuck_events;
    } else if (truth_motion.feasible(robot, cycle.plan.action)) {
      robot = step_robot(robot, cycle.plan.action, cfg.models.dt, cfg.models.limits);
    } else {
      ++m.blocked_moves;
    }
    target.step(cfg.models.dt, truth, truth_rng);
  }

  if (m.t_tra > 0) {
    m.r_los = static_cast<double>(m.t_los) / static_cast<double>(m.t_tra);
    m.eps_est = err_sum / static_cast<double>(m.t_tra);
  }
  if (opt.reference && !opt.nbv && m.steps_to_find) {
    EpisodeOptions ref = opt;
    ref.nbv = true;
    ref.reference = false;
    ScenarioConfig ref_cfg = cfg;
    ref_cfg.stop_on_find = true;
    const EpisodeResult base = run_episode(ref_cfg, ref);
    if (base.metrics.steps_to_find) m.t_s = *m.steps_to_find - *base.metrics.steps_to_find;
  }
  return res;
}

}  // namespace respire::harness
