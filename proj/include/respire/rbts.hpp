#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "respire/belief.hpp"
#include "respire/environment.hpp"
#include "respire/hierarchy.hpp"
#include "respire/models.hpp"

namespace respire {

/// v in {0, 1.5, 3} x w in {-pi/3, 0, pi/3}.
inline std::vector<RobotControl> default_primitives() {
  std::vector<RobotControl> out;
  for (double v : {0.0, 1.5, 3.0}) {
    for (double w : {-kPi / 3.0, 0.0, kPi / 3.0}) out.push_back({v, w});
  }
  return out;
}

struct PlannerConfig {
  std::size_t n_max = 100;
  int horizon = 10;
  double gamma = 0.95;
  double c_ucb = std::numbers::sqrt2;
  double d_thr = 0.375;  // half the smallest nonzero primitive displacement
  double o_thr = 0.1;
  std::vector<RobotControl> primitives = default_primitives();
  double pw_k = 1.0;
  double pw_alpha = 0.5;
  bool recycling = true;
  std::size_t max_iterations = 0;  // 0: 20 * n_max + 100
  /// Root values within this relative gap of the best count as tied; ties go
  /// to the default-policy action.
  double tie_tolerance = 0.3;
  /// Within this distance of the goal the default policy turns toward it
  /// without closing in; 0 disables.
  double standoff = 0.0;
  FilterStepConfig filter;

  void validate() const {
    if (n_max < 1) throw DomainError("n_max must be >= 1");
    if (horizon < 1) throw DomainError("horizon must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("gamma must be in (0, 1]");
    if (d_thr < 0.0) throw DomainError("d_thr must be >= 0");
    if (o_thr < 0.0) throw DomainError("o_thr must be >= 0");
    if (primitives.empty()) throw DomainError("primitive set is empty");
    if (!(standoff >= 0.0)) throw DomainError("standoff must be >= 0");
    if (!(tie_tolerance >= 0.0 && tie_tolerance < 1.0)) {
      throw DomainError("tie_tolerance must be in [0, 1)");
    }
  }
};

using RewardFn = std::function<double(const JointBeliefState&, const RobotControl&)>;

/// Per-cycle inputs shared by every node of one tree.
struct PlanningContext {
  const OccupancyGrid* map = nullptr;
  ModelConfig models;
  RewardFn reward;
  std::optional<Vec2> goal;          // rollout steering target
  std::shared_ptr<const DistanceField> field;  // geodesic distance to the goal
  Measurement root_observation;      // latest real measurement
};

enum class NodeKind { Belief, Action };

struct TreeNode {
  NodeKind kind = NodeKind::Belief;
  int parent = -1;
  int depth = 0;                 // actions taken from the root
  std::size_t action = 0;        // primitive index (action nodes; belief nodes: incoming)
  Measurement observation;       // last observation in the history (belief nodes)
  JointBeliefState belief;       // belief nodes only
  std::vector<std::size_t> untried;
  std::vector<std::size_t> children;
  std::size_t visits = 0;
  double q_sum = 0.0;   // action nodes: accumulated discounted return
  double reward = 0.0;  // action nodes: one-step reward R(B_parent, a)
  double value = 0.0;   // belief nodes: rollout or reused estimate
  bool degenerate = false;
  bool reused = false;
};

struct RolloutCluster {
  std::size_t node = 0;
  double reward = 0.0;
};

struct RootActionStats {
  std::size_t action = 0;
  std::size_t visits = 0;
  double mean_return = 0.0;
};

struct PlanDiagnostics {
  std::size_t nodes = 0;
  std::size_t iterations = 0;
  std::size_t rollouts = 0;
  std::size_t reuses = 0;
  std::size_t new_nodes_backed_up = 0;  // sum of |S_new|
  std::size_t degenerate_events = 0;
  int horizon = 0;
  double wall_time_s = 0.0;
  std::vector<RootActionStats> root;
};

struct PlanResult {
  std::optional<std::size_t> action_index;
  RobotControl action{};
  bool stuck = false;
  /// No root action had positive value; the action steers toward the goal.
  bool uninformative = false;
  PlanDiagnostics diagnostics;
};

/// Node distance: infinite when the last observations differ in
/// kind or by more than o_thr in any component, else the robot position gap.
inline double node_distance(const TreeNode& a, const TreeNode& b, double o_thr) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Measurement& oa = a.observation;
  const Measurement& ob = b.observation;
  if (oa.is_detection() != ob.is_detection()) return kInf;
  if (oa.is_detection()) {
    if (std::abs(oa.range() - ob.range()) > o_thr) return kInf;
    if (std::abs(angle_diff(oa.bearing(), ob.bearing())) > o_thr) return kInf;
  }
  return (a.belief.robot.position() - b.belief.robot.position()).norm();
}

/// Collision checks for motion primitives against the inflated known map.
class MotionChecker {
 public:
  MotionChecker(const OccupancyGrid& map, const ModelConfig& models)
      : map_(&map), models_(models), obstacles_(map, models.robot_radius) {}

  bool feasible(const RobotPose& pose, const RobotControl& u) const {
    if (!models_.limits.admits(u)) return false;
    if (u.v == 0.0) return true;
    const RobotPose next = step_robot(pose, u, models_.dt, models_.limits);
    return segment_clear(pose.position(), next.position());
  }

  /// Straight motion from `a` to `b` stays on the map, out of Occupied cells
  /// and, once outside the inflated zone, out of it. A start inside the
  /// inflated zone may therefore still move away from the obstacle.
  bool segment_clear(const Vec2& a, const Vec2& b) const {
    const int samples = std::max(2, static_cast<int>(std::ceil((b - a).norm() /
                                                                (0.5 * map_->resolution())))) + 1;
    bool escaping = obstacles_.blocked(a);
    for (int i = 1; i < samples; ++i) {
      const Vec2 p = a + (b - a) * (static_cast<double>(i) / (samples - 1));
      if (!map_->contains(p) || map_->query(p) == Cell::Occupied) return false;
      const bool blocked = obstacles_.blocked(p);
      if (blocked && !escaping) return false;
      escaping = escaping && blocked;
    }
    return !escaping;
  }

  std::vector<std::size_t> feasible_set(const RobotPose& pose,
                                        const std::vector<RobotControl>& primitives) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < primitives.size(); ++i) {
      if (feasible(pose, primitives[i])) out.push_back(i);
    }
    return out;
  }

 private:
  const OccupancyGrid* map_;
  ModelConfig models_;
  InflatedObstacles obstacles_;
};

/// Reusable belief tree: MCTS over alternating belief/action nodes whose
/// rollouts are cached and reused for nearby nodes.
class BeliefTree {
 public:
  BeliefTree(const JointBeliefState& root, const PlannerConfig& cfg, PlanningContext ctx, Rng& rng)
      : cfg_(cfg),
        ctx_(std::move(ctx)),
        rng_(&rng),
        checker_(*ctx_.map, ctx_.models),
        noise_(ctx_.models.noise.measurement) {
    cfg_.validate();
    if (!ctx_.reward) throw DomainError("planning context needs a reward function");
    TreeNode r;
    r.kind = NodeKind::Belief;
    r.belief = root;
    r.observation = ctx_.root_observation;
    r.untried = checker_.feasible_set(root.robot, cfg_.primitives);
    nodes_.push_back(std::move(r));

  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<RolloutCluster>& cache() const { return cache_; }
  const PlanDiagnostics& diagnostics() const { return diag_; }
  const PlannerConfig& config() const { return cfg_; }
  TreeNode& node(std::size_t i) { return nodes_[i]; }

  bool terminal(std::size_t n) const {
    return nodes_[n].kind == NodeKind::Belief && nodes_[n].depth >= cfg_.horizon;
  }

  PlanResult build() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t max_iter =
        cfg_.max_iterations > 0 ? cfg_.max_iterations : 20 * cfg_.n_max + 100;
    PlanResult result;
    if (nodes_[0].untried.empty() && nodes_[0].children.empty()) {
      result.stuck = true;
    } else {
      while (nodes_.size() <= cfg_.n_max && diag_.iterations < max_iter) {
        ++diag_.iterations;
        const std::size_t leaf = selection();
        const TreeNode& l = nodes_[leaf];
        if (l.kind == NodeKind::Belief && (terminal(leaf) || l.untried.empty())) {
          backpropagation(leaf, 0.0);
          continue;
        }
        const auto [action, obs] = sample_action_observation(leaf);
        const std::size_t fresh = expansion(leaf, action, obs);
        const auto fresh_set = recycling(fresh);
        diag_.new_nodes_backed_up += fresh_set.size();
        for (std::size_t n : fresh_set) backpropagation(n, nodes_[n].value);
      }
      result.action_index = best_root_action();
      if (result.action_index && ctx_.goal) {
        const double best_q = root_value(*result.action_index);
        if (const auto steer = rollout_action(nodes_[0].belief)) {
          if (best_q <= 1e-12) {
            result.action_index = steer;
            result.uninformative = true;
          } else if (visited_root_action(*steer) &&
                     root_value(*steer) >= (1.0 - cfg_.tie_tolerance) * best_q) {
            result.action_index = steer;
          }
        }
      }
      if (result.action_index) {
        result.action = cfg_.primitives[*result.action_index];
      } else {
        result.stuck = true;
      }
    }
    diag_.nodes = nodes_.size();
    diag_.horizon = cfg_.horizon;
    diag_.root.clear();
    for (std::size_t c : nodes_[0].children) {
      const TreeNode& a = nodes_[c];
      diag_.root.push_back({a.action, a.visits,
                            a.visits > 0 ? a.q_sum / static_cast<double>(a.visits) : 0.0});
    }
    diag_.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.diagnostics = diag_;
    return result;
  }

  /// Descends by UCB at fully expanded belief nodes and uniformly at action
  /// nodes; stops at belief nodes with untried actions, terminal or dead
  /// nodes, and action nodes admitting a new observation child.
  std::size_t selection() {
    std::size_t n = 0;
    for (;;) {
      const TreeNode& cur = nodes_[n];
      if (cur.kind == NodeKind::Belief) {
        if (terminal(n) || !cur.untried.empty() || cur.children.empty()) return n;
        n = ucb_child(n);
      } else {
        const double limit = cfg_.pw_k * std::pow(static_cast<double>(cur.visits), cfg_.pw_alpha);
        if (cur.children.empty() || static_cast<double>(cur.children.size()) < limit) return n;
        std::uniform_int_distribution<std::size_t> pick(0, cur.children.size() - 1);
        n = cur.children[pick(*rng_)];
      }
    }
  }

  /// UCB child of a fully expanded belief node, exploitation term min-max
  /// normalized over all action nodes in the tree.
  std::size_t ucb_child(std::size_t n) const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const TreeNode& t : nodes_) {
      if (t.kind != NodeKind::Action || t.visits == 0) continue;
      const double q = t.q_sum / static_cast<double>(t.visits);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    const double span = hi - lo;
    const TreeNode& parent = nodes_[n];
    const double log_parent = std::log(static_cast<double>(std::max<std::size_t>(parent.visits, 1)));
    std::size_t best = parent.children.front();
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c : parent.children) {
      const TreeNode& child = nodes_[c];
      double score = std::numeric_limits<double>::infinity();
      if (child.visits > 0) {
        const double q = child.q_sum / static_cast<double>(child.visits);
        const double exploit = span > 1e-12 ? (q - lo) / span : 0.0;
        score = exploit + cfg_.c_ucb * std::sqrt(log_parent / static_cast<double>(child.visits));
      }
      if (score > best_score ||
          (score == best_score && child.action < nodes_[best].action)) {
        best = c;
        best_score = score;
      }
    }
    return best;
  }

  /// Action (uniform over untried feasible primitives, or the action node's
  /// own action) and an observation simulated from a weighted particle draw.
  std::pair<std::size_t, Measurement> sample_action_observation(std::size_t n) {
    std::size_t belief_node = n;
    std::size_t action = 0;
    if (nodes_[n].kind == NodeKind::Belief) {
      auto& untried = nodes_[n].untried;
      if (untried.empty()) throw DomainError("sampling from a node with no untried actions");
      std::uniform_int_distribution<std::size_t> pick(0, untried.size() - 1);
      action = untried[pick(*rng_)];
    } else {
      action = nodes_[n].action;
      belief_node = static_cast<std::size_t>(nodes_[n].parent);
    }
    const JointBeliefState& b = nodes_[belief_node].belief;
    const RobotPose next =
        step_robot(b.robot, cfg_.primitives[action], ctx_.models.dt, ctx_.models.limits);
    std::discrete_distribution<std::size_t> particle(b.belief.weights.begin(),
                                                     b.belief.weights.end());
    const TargetState s =
        step_target_model(b.belief.states[particle(*rng_)], ctx_.models.noise.process, *rng_);
    return {action, observe(next, s, ctx_.models.camera, *ctx_.map, noise_, *rng_)};
  }

  /// Adds (if needed) the action node for `action` under belief node `n` (or
  /// uses action node `n`) and a new belief child holding the filtered copy of
  /// the parent belief.
  std::size_t expansion(std::size_t n, std::size_t action, const Measurement& o) {
    std::size_t action_node = n;
    if (nodes_[n].kind == NodeKind::Belief) {
      auto& untried = nodes_[n].untried;
      untried.erase(std::remove(untried.begin(), untried.end(), action), untried.end());
      action_node = find_or_add_action(n, action);
    }
    const std::size_t parent_belief = static_cast<std::size_t>(nodes_[action_node].parent);
    const JointBeliefState& pb = nodes_[parent_belief].belief;

    TreeNode child;
    child.kind = NodeKind::Belief;
    child.parent = static_cast<int>(action_node);
    child.depth = nodes_[parent_belief].depth + 1;
    child.action = nodes_[action_node].action;
    child.observation = o;
    child.belief.robot = step_robot(pb.robot, cfg_.primitives[child.action], ctx_.models.dt,
                                    ctx_.models.limits);
    FilterStepResult fs =
        filter_step(pb.belief, o, child.belief.robot, ctx_.models.camera, *ctx_.map,
                    ctx_.models.noise.process, noise_, *rng_, cfg_.filter);
    child.belief.belief = std::move(fs.belief);
    child.degenerate = fs.degenerate;
    diag_.degenerate_events += fs.degenerate ? 1 : 0;
    if (child.depth < cfg_.horizon) {
      child.untried = checker_.feasible_set(child.belief.robot, cfg_.primitives);
    }
    nodes_.push_back(std::move(child));
    const std::size_t id = nodes_.size() - 1;
    nodes_[action_node].children.push_back(id);
    return id;
  }

  /// Reuses the closest cached rollout when within d_thr; otherwise runs a
  /// rollout, caches it and grafts every reachable near-duplicate node onto the
  /// tree with the same value. Returns the nodes to back up. d_thr = 0
  /// disables reuse.
  std::vector<std::size_t> recycling(std::size_t fresh) {
    if (!cfg_.recycling) {
      nodes_[fresh].value = simulation(fresh);
      ++diag_.rollouts;
      return {fresh};
    }
    const bool reuse_enabled = cfg_.d_thr > 0.0;
    if (reuse_enabled && !cache_.empty()) {
      double best_d = std::numeric_limits<double>::infinity();
      std::size_t best = 0;
      for (std::size_t c = 0; c < cache_.size(); ++c) {
        const double d = node_distance(nodes_[cache_[c].node], nodes_[fresh], cfg_.o_thr);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best_d <= cfg_.d_thr) {
        nodes_[fresh].value = cache_[best].reward;
        nodes_[fresh].reused = true;
        ++diag_.reuses;
        return {fresh};
      }
    }
    const double q = simulation(fresh);
    ++diag_.rollouts;
    nodes_[fresh].value = q;
    cache_.push_back({fresh, q});
    std::vector<std::size_t> out{fresh};
    if (!reuse_enabled) return out;

    const Measurement o = nodes_[fresh].observation;
    const Vec2 anchor = nodes_[fresh].belief.robot.position();
    const std::size_t snapshot = nodes_.size();
    for (std::size_t nb = 0; nb < snapshot; ++nb) {
      if (nodes_[nb].kind != NodeKind::Belief || terminal(nb)) continue;
      const std::vector<std::size_t> actions = nodes_[nb].untried;
      for (std::size_t a : actions) {
        const RobotPose next = step_robot(nodes_[nb].belief.robot, cfg_.primitives[a],
                                          ctx_.models.dt, ctx_.models.limits);
        if ((next.position() - anchor).norm() > cfg_.d_thr) continue;
        const std::size_t grafted = expansion(nb, a, o);
        if (node_distance(nodes_[grafted], nodes_[fresh], cfg_.o_thr) <= cfg_.d_thr) {
          nodes_[grafted].value = q;
          nodes_[grafted].reused = true;
          ++diag_.reuses;
          out.push_back(grafted);
        }
      }
    }
    return out;
  }

  /// Discounted rollout return over the remaining horizon with the
  /// goal-directed default policy and maximum-likelihood observations.
  double simulation(std::size_t n) {
    const int remaining = cfg_.horizon - nodes_[n].depth;
    if (remaining <= 0) return 0.0;
    JointBeliefState state = nodes_[n].belief;
    double total = 0.0;
    double discount = 1.0;
    for (int t = 0; t < remaining; ++t) {
      const auto action = rollout_action(state);
      if (!action) break;
      const RobotControl& u = cfg_.primitives[*action];
      total += discount * ctx_.reward(state, u);
      discount *= cfg_.gamma;
      state.robot = step_robot(state.robot, u, ctx_.models.dt, ctx_.models.limits);
      const Measurement z = most_likely_observation(state);
      UpdateOutcome upd =
          update(state.belief, z, state.robot, ctx_.models.camera, *ctx_.map, noise_);
      state.belief = upd.degenerate
                         ? recover_degenerate(upd.belief, state.robot, ctx_.models.camera, *ctx_.map)
                         : std::move(upd.belief);
    }
    return total;
  }

  /// Walks to the root: every node's visit count increments and each action
  /// node accumulates r(a) + gamma * (value propagated from below).
  void backpropagation(std::size_t n, double value) {
    double v = value;
    std::size_t cur = n;
    nodes_[cur].visits += 1;
    while (nodes_[cur].parent >= 0) {
      TreeNode& a = nodes_[static_cast<std::size_t>(nodes_[cur].parent)];
      v = a.reward + cfg_.gamma * v;
      a.visits += 1;
      a.q_sum += v;
      cur = static_cast<std::size_t>(a.parent);
      nodes_[cur].visits += 1;
    }
  }

  /// Default policy. With a distance field: the feasible primitive whose best
  /// feasible follow-up ends closest to the goal (geodesic), ties to the
  /// closer intermediate pose, then the lower index; when that makes no
  /// progress, heading-greedy toward a point 1.5 m downhill. Otherwise: the feasible
  /// primitive with the smallest heading error toward the goal (or the belief
  /// mean), ties to the smaller distance, then the lower index.
  std::optional<std::size_t> rollout_action(const JointBeliefState& state) const {
    if (cfg_.standoff > 0.0 && ctx_.goal &&
        (*ctx_.goal - state.robot.position()).norm() < cfg_.standoff) {
      if (const auto a = hold_policy(state.robot, *ctx_.goal)) return a;
    }
    if (ctx_.field) {
      const double here = ctx_.field->at(state.robot.position());
      if (std::isfinite(here)) {
        double two = 0.0;
        const auto a = descend_field(state.robot, &two);
        if (a && two < here - 1e-9) return a;
        const Vec2 carrot = ctx_.field->downhill(state.robot.position(), 1.5);
        if ((carrot - state.robot.position()).norm() > 1e-9) {
          return rollout_policy(state.robot, carrot);
        }
        return a;
      }
    }
    return rollout_policy(state.robot, ctx_.goal ? *ctx_.goal : mean_estimate(state.belief));
  }

  std::optional<std::size_t> descend_field(const RobotPose& pose, double* value = nullptr) const {
    const DistanceField& field = *ctx_.field;
    std::optional<std::size_t> best;
    double best_two = std::numeric_limits<double>::infinity();
    double best_one = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cfg_.primitives.size(); ++i) {
      if (!checker_.feasible(pose, cfg_.primitives[i])) continue;
      const RobotPose p1 = step_robot(pose, cfg_.primitives[i], ctx_.models.dt, ctx_.models.limits);
      const double one = field.at(p1.position());
      double two = one;
      for (std::size_t j = 0; j < cfg_.primitives.size(); ++j) {
        if (cfg_.primitives[j].v == 0.0 || !checker_.feasible(p1, cfg_.primitives[j])) continue;
        const RobotPose p2 = step_robot(p1, cfg_.primitives[j], ctx_.models.dt, ctx_.models.limits);
        two = std::min(two, field.at(p2.position()));
      }
      if (!best || two < best_two - 1e-9 || (std::abs(two - best_two) <= 1e-9 && one < best_one - 1e-9)) {
        best = i;
        best_two = two;
        best_one = one;
      }
    }
    if (value) *value = best_two;
    return best;
  }

  /// Feasible primitive that does not close in on `goal` and leaves the
  /// smallest heading error toward it; ties go to the lower index.
  std::optional<std::size_t> hold_policy(const RobotPose& pose, const Vec2& goal) const {
    const double now = (goal - pose.position()).norm();
    std::optional<std::size_t> best;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cfg_.primitives.size(); ++i) {
      if (!checker_.feasible(pose, cfg_.primitives[i])) continue;
      const RobotPose next =
          step_robot(pose, cfg_.primitives[i], ctx_.models.dt, ctx_.models.limits);
      const Vec2 d = goal - next.position();
      if (d.norm() < now - 1e-9) continue;
      const double err = std::abs(angle_diff(std::atan2(d.y(), d.x()), next.theta));
      if (err < best_err - 1e-9) {
        best = i;
        best_err = err;
      }
    }
    return best;
  }

  /// Feasible primitive minimizing heading error toward `goal` after the step;
  /// ties go to the smaller remaining distance, then the lower index.
  std::optional<std::size_t> rollout_policy(const RobotPose& pose, const Vec2& goal) const {
    std::optional<std::size_t> best;
    double best_err = std::numeric_limits<double>::infinity();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cfg_.primitives.size(); ++i) {
      if (!checker_.feasible(pose, cfg_.primitives[i])) continue;
      const RobotPose next =
          step_robot(pose, cfg_.primitives[i], ctx_.models.dt, ctx_.models.limits);
      const Vec2 d = goal - next.position();
      const double err = d.norm() < 1e-9 ? 0.0
                                         : std::abs(angle_diff(std::atan2(d.y(), d.x()), next.theta));
      const double dist = d.norm();
      if (err < best_err - 1e-9 || (std::abs(err - best_err) <= 1e-9 && dist < best_dist - 1e-9)) {
        best = i;
        best_err = err;
        best_dist = dist;
      }
    }
    return best;
  }

  /// Empty when the in-FOV mass is below 1/2, else the weighted mean of the
  /// predicted in-FOV measurements.
  Measurement most_likely_observation(const JointBeliefState& state) const {
    const ParticleBelief& b = state.belief;
    double mass = 0.0;
    Vec2 z = Vec2::Zero();
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (!(b.weights[j] > 0.0)) continue;
      if (!point_visible(state.robot, b.states[j], ctx_.models.camera, *ctx_.map)) continue;
      mass += b.weights[j];
      z += b.weights[j] * measurement_function(state.robot, b.states[j]);
    }
    if (mass < 0.5) return Measurement::empty();
    return Measurement::detection(z / mass);
  }

  double root_value(std::size_t action) const {
    for (std::size_t c : nodes_[0].children) {
      const TreeNode& a = nodes_[c];
      if (a.action == action && a.visits > 0) return a.q_sum / static_cast<double>(a.visits);
    }
    return 0.0;
  }

  bool visited_root_action(std::size_t action) const {
    for (std::size_t c : nodes_[0].children) {
      if (nodes_[c].action == action && nodes_[c].visits > 0) return true;
    }
    return false;
  }

  /// Root action child with the highest mean return; ties to the lower index.
  std::optional<std::size_t> best_root_action() const {
    std::optional<std::size_t> best;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::size_t c : nodes_[0].children) {
      const TreeNode& a = nodes_[c];
      if (a.visits == 0) continue;
      const double q = a.q_sum / static_cast<double>(a.visits);
      if (q > best_q || (q == best_q && best && a.action < *best)) {
        best_q = q;
        best = a.action;
      }
    }
    return best;
  }

 private:
  std::size_t find_or_add_action(std::size_t belief_node, std::size_t action) {
    for (std::size_t c : nodes_[belief_node].children) {
      if (nodes_[c].action == action) return c;
    }
    TreeNode a;
    a.kind = NodeKind::Action;
    a.parent = static_cast<int>(belief_node);
    a.depth = nodes_[belief_node].depth;
    a.action = action;
    a.reward = ctx_.reward(nodes_[belief_node].belief, cfg_.primitives[action]);
    nodes_.push_back(std::move(a));
    const std::size_t id = nodes_.size() - 1;
    nodes_[belief_node].children.push_back(id);
    return id;
  }

  PlannerConfig cfg_;
  PlanningContext ctx_;
  Rng* rng_;
  MotionChecker checker_;
  MeasurementNoise noise_;
  std::vector<TreeNode> nodes_;
  std::vector<RolloutCluster> cache_;
  PlanDiagnostics diag_;
};

/// Builds one policy tree from the root belief and returns the best root
/// action with diagnostics. A root without feasible actions reports `stuck`.
inline PlanResult build_tree(const OccupancyGrid& map, const JointBeliefState& root,
                             const PlannerConfig& cfg, PlanningContext ctx, Rng& rng) {
  ctx.map = &map;
  BeliefTree tree(root, cfg, std::move(ctx), rng);
  return tree.build();
}

}  // namespace respire
