#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "respire/belief.hpp"
#include "respire/environment.hpp"
#include "respire/grid_cluster.hpp"
#include "respire/mi_reward.hpp"

namespace respire {

struct HierarchyConfig {
  double coarse_cell = 10.0;  // l_c
  double fine_cell = 1.0;     // l_f
  double robot_radius = 0.3;
  /// High-level particles lighter than this are not used as tour waypoints
  /// (they stay in the high-level layer). 0 keeps every waypoint.
  double min_waypoint_weight = 0.05;
  std::size_t exact_tsp_limit = 10;

  void validate() const {
    if (!(fine_cell > 0.0 && coarse_cell > fine_cell)) {
      throw DomainError("hierarchy requires coarse_cell > fine_cell > 0");
    }
    if (robot_radius < 0.0) throw DomainError("robot_radius must be >= 0");
  }
};

struct CoarseGrid {
  ParticleBelief high_level;
  std::vector<GridKey> keys;                      // per high-level particle
  std::vector<std::vector<std::size_t>> members;  // original indices per cell
};

/// One high-level particle per occupied coarse cell at its members' weighted
/// mean with their summed weight, plus the cell membership.
inline CoarseGrid coarse_grid(const ParticleBelief& b, double cell) {
  const auto clusters = cluster_by_grid(b, cell);
  CoarseGrid out;
  for (const auto& c : clusters) {
    out.high_level.states.push_back(c.mean);
    out.high_level.weights.push_back(c.weight);
    out.keys.push_back(c.key);
    out.members.push_back(c.members);
  }
  return out;
}

/// 8-connected A* over Free and Unknown cells with obstacles inflated by the
/// robot radius. Diagonal moves may not cut corners.
class GridPathfinder {
 public:
  GridPathfinder(const OccupancyGrid& map, double robot_radius)
      : map_(map), obstacles_(map, robot_radius) {
    const std::size_t n = map.cells().size();
    cost_.assign(n, kInf);
    stamp_.assign(n, 0);
  }

  bool traversable(const CellIndex& c) const { return !obstacles_.blocked(c); }

  /// Nearest traversable cell to `c` by breadth-first search, or nullopt.
  std::optional<CellIndex> nearest_traversable(const CellIndex& c) const {
    if (map_.in_bounds(c) && traversable(c)) return c;
    std::vector<std::uint8_t> seen(map_.cells().size(), 0);
    std::queue<CellIndex> frontier;
    CellIndex start{std::clamp(c.x, 0, map_.width() - 1), std::clamp(c.y, 0, map_.height() - 1)};
    frontier.push(start);
    seen[flat(start)] = 1;
    while (!frontier.empty()) {
      const CellIndex cur = frontier.front();
      frontier.pop();
      if (traversable(cur)) return cur;
      for (const auto& [dx, dy] : kMoves4) {
        const CellIndex nb{cur.x + dx, cur.y + dy};
        if (!map_.in_bounds(nb) || seen[flat(nb)]) continue;
        seen[flat(nb)] = 1;
        frontier.push(nb);
      }
    }
    return std::nullopt;
  }

  /// Shortest path length in meters between two cells; +inf when unreachable.
  /// The start cell is allowed even if it is inside the inflated obstacles.
  double distance(const CellIndex& from, const CellIndex& to) { return search(from, to); }

 private:
  double search(const CellIndex& from, const CellIndex& to) {
    if (!map_.in_bounds(from) || !map_.in_bounds(to)) return kInf;
    if (from == to) return 0.0;
    if (!traversable(to)) return kInf;
    ++generation_;
    const double res = map_.resolution();
    auto heuristic = [&](const CellIndex& c) {
      const double dx = static_cast<double>(c.x - to.x);
      const double dy = static_cast<double>(c.y - to.y);
      return res * std::sqrt(dx * dx + dy * dy);
    };
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    set_cost(flat(from), 0.0);
    open.push({heuristic(from), flat(from)});
    const std::size_t goal = flat(to);
    while (!open.empty()) {
      const auto [f, idx] = open.top();
      open.pop();
      const double g = get_cost(idx);
      const CellIndex cur = unflat(idx);
      if (f - heuristic(cur) > g + 1e-9) continue;
      if (idx == goal) return g;
      for (int k = 0; k < 8; ++k) {
        const int dx = kMoves8[k][0];
        const int dy = kMoves8[k][1];
        const CellIndex nb{cur.x + dx, cur.y + dy};
        if (!map_.in_bounds(nb) || !traversable(nb)) continue;
        if (dx != 0 && dy != 0 &&
            (!traversable(CellIndex{cur.x + dx, cur.y}) ||
             !traversable(CellIndex{cur.x, cur.y + dy}))) {
          continue;
        }
        const double step = (dx != 0 && dy != 0) ? res * std::numbers::sqrt2 : res;
        const double candidate = g + step;
        const std::size_t ni = flat(nb);
        if (candidate + 1e-12 < get_cost(ni)) {
          set_cost(ni, candidate);
          open.push({candidate + heuristic(nb), ni});
        }
      }
    }
    return kInf;
  }

  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr int kMoves8[8][2] = {{1, 0}, {-1, 0}, {0, 1},  {0, -1},
                                        {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
  static constexpr std::pair<int, int> kMoves4[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

  std::size_t flat(const CellIndex& c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(map_.width()) +
           static_cast<std::size_t>(c.x);
  }
  CellIndex unflat(std::size_t i) const {
    return {static_cast<int>(i % static_cast<std::size_t>(map_.width())),
            static_cast<int>(i / static_cast<std::size_t>(map_.width()))};
  }
  double get_cost(std::size_t i) const { return stamp_[i] == generation_ ? cost_[i] : kInf; }
  void set_cost(std::size_t i, double v) {
    stamp_[i] = generation_;
    cost_[i] = v;
  }

  const OccupancyGrid& map_;
  InflatedObstacles obstacles_;
  std::vector<double> cost_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
};

/// Open path-TSP from node 0 through all other nodes of `dist`; returns the
/// visiting order (excluding node 0). Held-Karp up to `exact_limit` waypoints,
/// nearest neighbour plus 2-opt beyond.
inline std::vector<std::size_t> open_tour(const std::vector<std::vector<double>>& dist,
                                          std::size_t exact_limit) {
  const std::size_t k = dist.size() - 1;
  if (k == 0) return {};
  auto tour_cost = [&](const std::vector<std::size_t>& order) {
    double c = dist[0][order[0]];
    for (std::size_t i = 1; i < order.size(); ++i) c += dist[order[i - 1]][order[i]];
    return c;
  };
  if (k <= exact_limit) {
    const std::size_t full = (std::size_t{1} << k) - 1;
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> dp((full + 1) * k, kInf);
    std::vector<int> parent((full + 1) * k, -1);
    for (std::size_t j = 0; j < k; ++j) dp[(std::size_t{1} << j) * k + j] = dist[0][j + 1];
    for (std::size_t mask = 1; mask <= full; ++mask) {
      for (std::size_t j = 0; j < k; ++j) {
        if (!(mask & (std::size_t{1} << j))) continue;
        const double cur = dp[mask * k + j];
        if (cur == kInf) continue;
        for (std::size_t nxt = 0; nxt < k; ++nxt) {
          if (mask & (std::size_t{1} << nxt)) continue;
          const std::size_t nmask = mask | (std::size_t{1} << nxt);
          const double cand = cur + dist[j + 1][nxt + 1];
          if (cand < dp[nmask * k + nxt]) {
            dp[nmask * k + nxt] = cand;
            parent[nmask * k + nxt] = static_cast<int>(j);
          }
        }
      }
    }
    std::size_t last = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (dp[full * k + j] < dp[full * k + last]) last = j;
    }
    std::vector<std::size_t> order;
    std::size_t mask = full;
    int cur = static_cast<int>(last);
    while (cur >= 0) {
      order.push_back(static_cast<std::size_t>(cur) + 1);
      const int prev = parent[mask * k + static_cast<std::size_t>(cur)];
      mask &= ~(std::size_t{1} << static_cast<std::size_t>(cur));
      cur = prev;
    }
    std::reverse(order.begin(), order.end());
    return order;
  }

  std::vector<std::size_t> order;
  std::vector<bool> used(k + 1, false);
  std::size_t at = 0;
  for (std::size_t step = 0; step < k; ++step) {
    std::size_t best = 0;
    for (std::size_t j = 1; j <= k; ++j) {
      if (!used[j] && (best == 0 || dist[at][j] < dist[at][best])) best = j;
    }
    used[best] = true;
    order.push_back(best);
    at = best;
  }
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      for (std::size_t j = i + 1; j < order.size(); ++j) {
        std::vector<std::size_t> cand = order;
        std::reverse(cand.begin() + static_cast<std::ptrdiff_t>(i),
                     cand.begin() + static_cast<std::ptrdiff_t>(j) + 1);
        if (tour_cost(cand) + 1e-12 < tour_cost(order)) {
          order = std::move(cand);
          improved = true;
        }
      }
    }
  }
  return order;
}

struct GoalSelection {
  std::size_t index = 0;  // into the high-level particles
  Vec2 point = Vec2::Zero();
  std::vector<std::size_t> unreachable;
  bool euclidean_fallback = false;
  std::vector<std::string> warnings;
};

/// Picks the first waypoint of the shortest open tour that starts at the
/// robot and visits every (sufficiently heavy) high-level particle, using
/// obstacle-aware path lengths on the known map.
inline GoalSelection find_goal(const ParticleBelief& high_level, const RobotPose& robot,
                               const OccupancyGrid& map, const HierarchyConfig& cfg = {}) {
  if (high_level.size() == 0) throw DomainError("find_goal needs at least one waypoint");
  GoalSelection out;
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < high_level.size(); ++i) {
    if (high_level.weights[i] >= cfg.min_waypoint_weight) candidates.push_back(i);
  }
  if (candidates.empty()) {
    for (std::size_t i = 0; i < high_level.size(); ++i) candidates.push_back(i);
  }
  if (candidates.size() == 1) {
    out.index = candidates[0];
    out.point = high_level.states[out.index];
    return out;
  }

  GridPathfinder paths(map, cfg.robot_radius);
  const CellIndex start = map.cell_of(robot.position());
  std::vector<std::optional<CellIndex>> cells;
  for (std::size_t i : candidates) cells.push_back(paths.nearest_traversable(map.cell_of(high_level.states[i])));

  std::vector<std::size_t> reachable;
  std::vector<double> from_robot;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double d = cells[c] ? paths.distance(start, *cells[c]) : std::numeric_limits<double>::infinity();
    if (std::isfinite(d)) {
      reachable.push_back(c);
      from_robot.push_back(d);
    } else {
      out.unreachable.push_back(candidates[c]);
      out.warnings.push_back("waypoint " + std::to_string(candidates[c]) + " unreachable");
    }
  }

  std::vector<std::vector<double>> dist;
  std::vector<std::size_t> node_to_candidate;
  if (reachable.empty()) {
    out.euclidean_fallback = true;
    out.warnings.push_back("no waypoint reachable; using straight-line distances");
    const std::size_t k = candidates.size();
    dist.assign(k + 1, std::vector<double>(k + 1, 0.0));
    auto pt = [&](std::size_t node) {
      return node == 0 ? robot.position() : high_level.states[candidates[node - 1]];
    };
    for (std::size_t a = 0; a <= k; ++a) {
      for (std::size_t b = 0; b <= k; ++b) dist[a][b] = (pt(a) - pt(b)).norm();
    }
    for (std::size_t c = 0; c < k; ++c) node_to_candidate.push_back(c);
  } else {
    const std::size_t k = reachable.size();
    dist.assign(k + 1, std::vector<double>(k + 1, 0.0));
    for (std::size_t a = 0; a < k; ++a) {
      dist[0][a + 1] = dist[a + 1][0] = from_robot[a];
      for (std::size_t b = a + 1; b < k; ++b) {
        double d = paths.distance(*cells[reachable[a]], *cells[reachable[b]]);
        if (!std::isfinite(d)) {
          d = (high_level.states[candidates[reachable[a]]] -
               high_level.states[candidates[reachable[b]]]).norm();
        }
        dist[a + 1][b + 1] = dist[b + 1][a + 1] = d;
      }
    }
    node_to_candidate = reachable;
  }
  const auto order = open_tour(dist, cfg.exact_tsp_limit);
  out.index = candidates[node_to_candidate[order.front() - 1]];
  out.point = high_level.states[out.index];
  return out;
}

/// Geodesic distance to a goal per cell, 8-connected without corner cutting
/// through Occupied cells. Cells inside the inflated zone cost five times
/// their length, so poses grazing an obstacle still get a finite value.
/// Occupied or unreachable cells are +inf.
class DistanceField {
 public:
  DistanceField(const OccupancyGrid& map, double robot_radius, const Vec2& goal)
      : map_(&map), obstacles_(map, robot_radius), dist_(map.cells().size(), kInf) {
    if (!map.contains(goal)) return;
    GridPathfinder probe(map, robot_radius);
    const auto start = probe.nearest_traversable(map.cell_of(goal));
    if (!start) return;
    const double res = map.resolution();
    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    dist_[flat(*start)] = 0.0;
    open.push({0.0, flat(*start)});
    while (!open.empty()) {
      const auto [d, idx] = open.top();
      open.pop();
      if (d > dist_[idx]) continue;
      const CellIndex cur{static_cast<int>(idx % static_cast<std::size_t>(map.width())),
                          static_cast<int>(idx / static_cast<std::size_t>(map.width()))};
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          if (dx == 0 && dy == 0) continue;
          const CellIndex nb{cur.x + dx, cur.y + dy};
          if (!map.in_bounds(nb) || map.at(nb) == Cell::Occupied) continue;
          if (dx != 0 && dy != 0 &&
              (map.at(CellIndex{cur.x + dx, cur.y}) == Cell::Occupied ||
               map.at(CellIndex{cur.x, cur.y + dy}) == Cell::Occupied)) {
            continue;
          }
          const double step = (dx != 0 && dy != 0) ? res * std::numbers::sqrt2 : res;
          const double nd = d + (obstacles_.blocked(nb) ? kInflatedCost * step : step);
          const std::size_t ni = flat(nb);
          if (nd + 1e-12 < dist_[ni]) {
            dist_[ni] = nd;
            open.push({nd, ni});
          }
        }
      }
    }
  }

  double at(const Vec2& p) const {
    if (!map_->contains(p)) return kInf;
    return dist_[flat(map_->cell_of(p))];
  }

  /// Follows steepest descent from `p` for about `length` metres and returns
  /// the cell center reached; `p` itself when no finite neighbor is lower.
  Vec2 downhill(const Vec2& p, double length) const {
    if (!map_->contains(p)) return p;
    CellIndex cur = map_->cell_of(p);
    double travelled = 0.0;
    bool moved = false;
    while (travelled < length) {
      const double here = dist_[flat(cur)];
      CellIndex best = cur;
      double best_d = here;
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          const CellIndex nb{cur.x + dx, cur.y + dy};
          if ((dx == 0 && dy == 0) || !map_->in_bounds(nb)) continue;
          const double d = dist_[flat(nb)];
          if (d < best_d) {
            best = nb;
            best_d = d;
          }
        }
      }
      if (best.x == cur.x && best.y == cur.y) break;
      travelled += (map_->cell_center(best) - map_->cell_center(cur)).norm();
      cur = best;
      moved = true;
    }
    return moved ? map_->cell_center(cur) : p;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  static constexpr double kInflatedCost = 5.0;

  std::size_t flat(const CellIndex& c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(map_->width()) +
           static_cast<std::size_t>(c.x);
  }

  const OccupancyGrid* map_;
  InflatedObstacles obstacles_;
  std::vector<double> dist_;
};

struct HierarchyOutput {
  ParticleBelief high_level;
  GoalSelection goal;
  GridKey goal_cell;
  std::vector<std::size_t> critical_members;  // indices into the input belief
  ParticleBelief critical;
  ParticleBelief simplified;
};

/// Coarse grid -> goal cell -> critical particles (renormalized) -> fine-grid
/// simplification.
inline HierarchyOutput particle_hierarchy(const ParticleBelief& b, const RobotPose& robot,
                                          const OccupancyGrid& map,
                                          const HierarchyConfig& cfg = {}) {
  cfg.validate();
  HierarchyOutput out;
  CoarseGrid coarse = coarse_grid(b, cfg.coarse_cell);
  out.high_level = coarse.high_level;
  out.goal = find_goal(coarse.high_level, robot, map, cfg);
  out.goal_cell = coarse.keys[out.goal.index];
  out.critical_members = coarse.members[out.goal.index];
  for (std::size_t idx : out.critical_members) {
    out.critical.states.push_back(b.states[idx]);
    out.critical.weights.push_back(b.weights[idx]);
  }
  if (out.critical.total_weight() > 0.0) {
    out.critical.normalize();
  } else {
    std::fill(out.critical.weights.begin(), out.critical.weights.end(),
              1.0 / static_cast<double>(out.critical.size()));
  }
  out.simplified = simplify_particles(out.critical, cfg.fine_cell);
  return out;
}

}  // namespace respire
