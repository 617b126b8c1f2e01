#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "respire/belief.hpp"
#include "respire/environment.hpp"
#include "respire/hierarchy.hpp"
#include "respire/mi_reward.hpp"
#include "respire/models.hpp"
#include "respire/rbts.hpp"

namespace respire::harness {

using json = nlohmann::json;

/// Invalid scenario content or a missing referenced file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GmmComponent {
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  double weight = 1.0;
};

struct TargetScript {
  Vec2 start = Vec2::Zero();
  std::vector<Vec2> waypoints;
  double speed = 0.0;   // m/s along the waypoint polyline
  double jitter = 0.0;  // per-step Gaussian std, meters
  bool loop = false;
};

struct AblationFlags {
  bool hierarchy = true;
  bool recycling = true;
};

struct ScenarioConfig {
  std::filesystem::path map_path;
  OccupancyGrid truth;
  RobotPose robot_start;
  TargetScript target;
  std::vector<GmmComponent> initial_belief;
  std::size_t particles = 500;
  ModelConfig models;
  SensorConfig lidar{6.0, kPi / 4.0, SensorKind::Lidar};
  PlannerConfig planner;
  int horizon_search = 10;
  int horizon_tracking = 5;
  /// Used in tracking while the last measurement is a detection.
  double tracking_standoff = 3.0;
  double tracking_tie_tolerance = 0.7;
  HierarchyConfig hierarchy;
  MiConfig mi;
  int steps = 200;
  bool stop_on_find = false;
  std::uint64_t seed = 1;
  AblationFlags ablation;
};

namespace detail {

inline Vec2 read_vec2(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(what + " must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Mat2 read_mat2(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(what + " must be a 2x2 array");
  Mat2 m;
  for (int r = 0; r < 2; ++r) {
    const Vec2 row = read_vec2(j[static_cast<std::size_t>(r)], what);
    m(r, 0) = row.x();
    m(r, 1) = row.y();
  }
  return m;
}

inline void check_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline SensorConfig read_sensor(const json& j, SensorConfig base, const std::string& where) {
  check_keys(j, where, {"max_range", "half_angle"});
  read_opt(j, "max_range", base.max_range);
  read_opt(j, "half_angle", base.half_angle);
  return base;
}

}  // namespace detail

inline OccupancyGrid load_map_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open map file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return load_map(buf.str());
  } catch (const ParseError& e) {
    throw ConfigError(path.string() + ":" + std::to_string(e.line()) + ": " + e.what());
  }
}

inline void validate_scenario(const ScenarioConfig& cfg);

/// Parses and validates a scenario document. Relative map paths resolve
/// against `base_dir`.
inline ScenarioConfig parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  using detail::check_keys;
  using detail::read_opt;
  ScenarioConfig cfg;
  try {
    check_keys(doc, "scenario",
               {"map", "robot_start", "target", "initial_belief", "particles", "noise", "camera",
                "lidar", "robot", "planner", "hierarchy", "mi", "episode", "seed", "ablation"});
    if (!doc.contains("map")) throw ConfigError("missing key 'map'");
    cfg.map_path = doc.at("map").get<std::string>();
    if (cfg.map_path.is_relative()) cfg.map_path = base_dir / cfg.map_path;

    if (!doc.contains("robot_start")) throw ConfigError("missing key 'robot_start'");
    const json& rs = doc.at("robot_start");
    if (!rs.is_array() || rs.size() != 3) throw ConfigError("robot_start must be [x, y, theta]");
    cfg.robot_start = {rs[0].get<double>(), rs[1].get<double>(), wrap_angle(rs[2].get<double>())};

    if (!doc.contains("target")) throw ConfigError("missing key 'target'");
    const json& t = doc.at("target");
    check_keys(t, "target", {"start", "waypoints", "speed", "jitter", "loop"});
    cfg.target.start = detail::read_vec2(t.at("start"), "target.start");
    if (t.contains("waypoints")) {
      for (const json& w : t.at("waypoints")) {
        cfg.target.waypoints.push_back(detail::read_vec2(w, "target.waypoints"));
      }
    }
    read_opt(t, "speed", cfg.target.speed);
    read_opt(t, "jitter", cfg.target.jitter);
    read_opt(t, "loop", cfg.target.loop);

    if (!doc.contains("initial_belief")) throw ConfigError("missing key 'initial_belief'");
    const json& ib = doc.at("initial_belief");
    check_keys(ib, "initial_belief", {"components"});
    for (const json& c : ib.at("components")) {
      check_keys(c, "initial_belief.components", {"mean", "cov", "weight"});
      GmmComponent g;
      g.mean = detail::read_vec2(c.at("mean"), "component mean");
      g.cov = detail::read_mat2(c.at("cov"), "component cov");
      read_opt(c, "weight", g.weight);
      cfg.initial_belief.push_back(g);
    }

    read_opt(doc, "particles", cfg.particles);
    read_opt(doc, "seed", cfg.seed);

    if (doc.contains("noise")) {
      const json& n = doc.at("noise");
      check_keys(n, "noise", {"process", "measurement"});
      if (n.contains("process")) cfg.models.noise.process = detail::read_mat2(n.at("process"), "noise.process");
      if (n.contains("measurement")) {
        cfg.models.noise.measurement = detail::read_mat2(n.at("measurement"), "noise.measurement");
      }
    }
    if (doc.contains("camera")) cfg.models.camera = detail::read_sensor(doc.at("camera"), cfg.models.camera, "camera");
    if (doc.contains("lidar")) cfg.lidar = detail::read_sensor(doc.at("lidar"), cfg.lidar, "lidar");

    if (doc.contains("robot")) {
      const json& r = doc.at("robot");
      check_keys(r, "robot", {"dt", "v_max", "w_max", "radius"});
      read_opt(r, "dt", cfg.models.dt);
      read_opt(r, "v_max", cfg.models.limits.v_max);
      if (r.contains("w_max")) {
        cfg.models.limits.w_max = r.at("w_max").get<double>();
        cfg.models.limits.w_min = -cfg.models.limits.w_max;
      }
      read_opt(r, "radius", cfg.models.robot_radius);
    }
    cfg.hierarchy.robot_radius = cfg.models.robot_radius;

    if (doc.contains("planner")) {
      const json& p = doc.at("planner");
      check_keys(p, "planner",
                 {"n_max", "horizon_search", "horizon_tracking", "gamma", "c_ucb", "d_thr", "o_thr",
                  "pw_k", "pw_alpha", "tie_tolerance", "tie_tolerance_tracking", "standoff",
                  "primitives"});
      read_opt(p, "n_max", cfg.planner.n_max);
      read_opt(p, "horizon_search", cfg.horizon_search);
      read_opt(p, "horizon_tracking", cfg.horizon_tracking);
      read_opt(p, "gamma", cfg.planner.gamma);
      read_opt(p, "c_ucb", cfg.planner.c_ucb);
      read_opt(p, "d_thr", cfg.planner.d_thr);
      read_opt(p, "o_thr", cfg.planner.o_thr);
      read_opt(p, "pw_k", cfg.planner.pw_k);
      read_opt(p, "pw_alpha", cfg.planner.pw_alpha);
      read_opt(p, "tie_tolerance", cfg.planner.tie_tolerance);
      read_opt(p, "tie_tolerance_tracking", cfg.tracking_tie_tolerance);
      read_opt(p, "standoff", cfg.tracking_standoff);
      if (p.contains("primitives")) {
        cfg.planner.primitives.clear();
        for (const json& u : p.at("primitives")) {
          const Vec2 vw = detail::read_vec2(u, "planner.primitives");
          cfg.planner.primitives.push_back({vw.x(), vw.y()});
        }
      }
    }
    if (doc.contains("hierarchy")) {
      const json& h = doc.at("hierarchy");
      check_keys(h, "hierarchy", {"coarse_cell", "fine_cell", "min_waypoint_weight", "exact_tsp_limit"});
      read_opt(h, "coarse_cell", cfg.hierarchy.coarse_cell);
      read_opt(h, "fine_cell", cfg.hierarchy.fine_cell);
      read_opt(h, "min_waypoint_weight", cfg.hierarchy.min_waypoint_weight);
      read_opt(h, "exact_tsp_limit", cfg.hierarchy.exact_tsp_limit);
    }
    if (doc.contains("mi")) {
      const json& m = doc.at("mi");
      check_keys(m, "mi", {"lambda", "simplify_cell", "truncation_radius", "negative_tolerance"});
      read_opt(m, "lambda", cfg.mi.lambda);
      read_opt(m, "simplify_cell", cfg.mi.simplify_cell);
      if (m.contains("truncation_radius") && !m.at("truncation_radius").is_null()) {
        cfg.mi.truncation_radius = m.at("truncation_radius").get<double>();
      }
      read_opt(m, "negative_tolerance", cfg.mi.negative_tolerance);
    }
    if (doc.contains("episode")) {
      const json& e = doc.at("episode");
      check_keys(e, "episode", {"steps", "stop_on_find"});
      read_opt(e, "steps", cfg.steps);
      read_opt(e, "stop_on_find", cfg.stop_on_find);
    }
    if (doc.contains("ablation")) {
      const json& a = doc.at("ablation");
      check_keys(a, "ablation", {"hierarchy", "recycling"});
      read_opt(a, "hierarchy", cfg.ablation.hierarchy);
      read_opt(a, "recycling", cfg.ablation.recycling);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }

  cfg.truth = load_map_file(cfg.map_path);
  validate_scenario(cfg);
  return cfg;
}

/// Structural checks beyond parsing. Throws ConfigError.
inline void validate_scenario(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (cfg.steps < 1) fail("episode.steps must be >= 1");
  if (cfg.particles < 1) fail("particles must be >= 1");
  if (cfg.initial_belief.empty()) fail("initial_belief needs at least one component");
  double total = 0.0;
  for (const auto& c : cfg.initial_belief) {
    if (!(c.weight >= 0.0)) fail("initial_belief weights must be >= 0");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) fail("initial_belief weights must sum to 1");
  if (cfg.target.speed < 0.0 || cfg.target.jitter < 0.0) fail("target speed and jitter must be >= 0");
  if (cfg.horizon_search < 1 || cfg.horizon_tracking < 1) fail("planning horizons must be >= 1");
  if (!(cfg.tracking_standoff >= 0.0)) fail("planner.standoff must be >= 0");
  if (!(cfg.tracking_tie_tolerance >= 0.0 && cfg.tracking_tie_tolerance < 1.0)) {
    fail("planner.tie_tolerance_tracking must be in [0, 1)");
  }
  if (!cfg.truth.contains(cfg.robot_start.position())) fail("robot_start outside the map");
  if (cfg.truth.query(cfg.robot_start.position()) == Cell::Occupied) fail("robot_start inside an obstacle");
  if (!cfg.truth.contains(cfg.target.start)) fail("target.start outside the map");
  for (const Vec2& w : cfg.target.waypoints) {
    if (!cfg.truth.contains(w)) fail("target waypoint outside the map");
  }
  if (!(cfg.models.dt > 0.0)) fail("robot.dt must be > 0");
  try {
    for (const auto& c : cfg.initial_belief) cholesky_factor(c.cov, "initial_belief covariance");
    cfg.models.noise.validate();
    cfg.models.camera.validate();
    cfg.lidar.validate();
    cfg.planner.validate();
    cfg.hierarchy.validate();
    cfg.mi.validate();
  } catch (const std::exception& e) {
    fail(e.what());
  }
  for (const auto& u : cfg.planner.primitives) {
    if (!cfg.models.limits.admits(u)) fail("planner primitive outside the control limits");
  }
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_scenario(doc, path.parent_path());
}

/// Draws N particles from the initial GMM; draws that fall off the map are
/// redrawn (up to 1000 tries, then clamped inside).
inline ParticleBelief sample_initial_belief(const ScenarioConfig& cfg, Rng& rng) {
  std::vector<double> w;
  std::vector<Mat2> chol;
  for (const auto& c : cfg.initial_belief) {
    w.push_back(c.weight);
    chol.push_back(cholesky_factor(c.cov));
  }
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  const Vec2 lo = cfg.truth.origin();
  const Vec2 hi = lo + cfg.truth.extent();
  std::vector<TargetState> states;
  states.reserve(cfg.particles);
  for (std::size_t i = 0; i < cfg.particles; ++i) {
    Vec2 p;
    for (int attempt = 0;; ++attempt) {
      const std::size_t k = pick(rng);
      p = cfg.initial_belief[k].mean + chol[k] * standard_normal2(rng);
      if (cfg.truth.contains(p)) break;
      if (attempt >= 1000) {
        p = p.cwiseMax(lo).cwiseMin(hi - Vec2::Constant(1e-6));
        break;
      }
    }
    states.push_back(p);
  }
  return ParticleBelief::uniform(std::move(states));
}

/// Constant-speed waypoint follower with optional Gaussian jitter. Moves that
/// would leave the map or enter an Occupied truth cell are dropped.
class TargetMover {
 public:
  explicit TargetMover(const TargetScript& script) : script_(script), position_(script.start) {}

  const Vec2& position() const { return position_; }

  void step(double dt, const OccupancyGrid& truth, Rng& rng) {
    Vec2 next = position_;
    double budget = script_.speed * dt;
    while (budget > 1e-12 && next_wp_ < script_.waypoints.size()) {
      const Vec2 d = script_.waypoints[next_wp_] - next;
      const double len = d.norm();
      if (len <= budget) {
        next = script_.waypoints[next_wp_];
        budget -= len;
        ++next_wp_;
        if (next_wp_ == script_.waypoints.size() && script_.loop) next_wp_ = 0;
        if (len < 1e-12 && script_.waypoints.size() == 1) break;
      } else {
        next += d * (budget / len);
        budget = 0.0;
      }
    }
    if (script_.jitter > 0.0) next += script_.jitter * standard_normal2(rng);
    if (truth.contains(next) && truth.query(next) != Cell::Occupied) position_ = next;
  }

 private:
  TargetScript script_;
  Vec2 position_;
  std::size_t next_wp_ = 0;
};

}  // namespace respire::harness
