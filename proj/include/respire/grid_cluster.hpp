#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "respire/belief.hpp"

namespace respire {

struct GridKey {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend auto operator<=>(const GridKey&, const GridKey&) = default;
};

inline GridKey grid_key(const Vec2& p, double cell) {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell)),
          static_cast<std::int64_t>(std::floor(p.y() / cell))};
}

/// Particles sharing one cell of an origin-anchored square grid.
struct GridCluster {
  GridKey key;
  TargetState mean = TargetState::Zero();
  double weight = 0.0;
  std::vector<std::size_t> members;
};

/// Groups particles by grid cell of side `cell`. Clusters are ordered by key;
/// each carries the weight-normalized member mean (plain mean when all member
/// weights are zero) and the summed member weight.
inline std::vector<GridCluster> cluster_by_grid(const ParticleBelief& b, double cell) {
  if (!(cell > 0.0)) throw DomainError("grid cell size must be > 0");
  std::vector<GridKey> keys(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) keys[j] = grid_key(b.states[j], cell);
  std::vector<std::size_t> order(b.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return keys[a] < keys[c]; });

  std::vector<GridCluster> clusters;
  for (std::size_t idx : order) {
    if (clusters.empty() || clusters.back().key != keys[idx]) {
      clusters.push_back(GridCluster{keys[idx], TargetState::Zero(), 0.0, {}});
    }
    GridCluster& c = clusters.back();
    c.members.push_back(idx);
    c.weight += b.weights[idx];
    c.mean += b.weights[idx] * b.states[idx];
  }
  for (GridCluster& c : clusters) {
    if (c.weight > 0.0) {
      c.mean /= c.weight;
    } else {
      c.mean.setZero();
      for (std::size_t idx : c.members) c.mean += b.states[idx];
      c.mean /= static_cast<double>(c.members.size());
    }
  }
  return clusters;
}

/// One particle per cluster, weights renormalized to sum to 1.
inline ParticleBelief belief_from_clusters(const std::vector<GridCluster>& clusters) {
  ParticleBelief out;
  out.states.reserve(clusters.size());
  out.weights.reserve(clusters.size());
  for (const GridCluster& c : clusters) {
    out.states.push_back(c.mean);
    out.weights.push_back(c.weight);
  }
  if (out.total_weight() > 0.0) {
    out.normalize();
  } else if (!out.weights.empty()) {
    std::fill(out.weights.begin(), out.weights.end(), 1.0 / static_cast<double>(out.size()));
  }
  return out;
}

}  // namespace respire
