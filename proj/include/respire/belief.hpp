#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "respire/common.hpp"
#include "respire/environment.hpp"
#include "respire/models.hpp"

namespace respire {

/// Weighted particle approximation of the target posterior.
struct ParticleBelief {
  std::vector<TargetState> states;
  std::vector<double> weights;

  ParticleBelief() = default;
  ParticleBelief(std::vector<TargetState> s, std::vector<double> w)
      : states(std::move(s)), weights(std::move(w)) {}

  static ParticleBelief uniform(std::vector<TargetState> s) {
    const double w = s.empty() ? 0.0 : 1.0 / static_cast<double>(s.size());
    std::vector<double> weights(s.size(), w);
    return {std::move(s), std::move(weights)};
  }

  std::size_t size() const { return states.size(); }

  double total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

  void validate() const {
    if (states.empty()) throw DomainError("belief needs at least one particle");
    if (states.size() != weights.size()) throw DomainError("states/weights size mismatch");
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("weights must be finite and >= 0");
    }
    if (std::abs(total_weight() - 1.0) > 1e-9) throw DomainError("weights must sum to 1");
  }

  void normalize() {
    const double total = total_weight();
    if (!(total > 0.0)) throw DomainError("cannot normalize zero total weight");
    for (double& w : weights) w /= total;
  }
};

/// Belief-MDP state: fully observed robot pose plus target belief.
struct JointBeliefState {
  RobotPose robot;
  ParticleBelief belief;
};

/// Propagates every particle through the random-walk model with noise Q.
/// Weights are untouched.
inline ParticleBelief predict(const ParticleBelief& b, const Mat2& process_cov, Rng& rng) {
  const Mat2 chol = cholesky_factor(process_cov, "process covariance Q");
  ParticleBelief out = b;
  for (auto& s : out.states) s += chol * standard_normal2(rng);
  return out;
}

struct UpdateOutcome {
  ParticleBelief belief;
  /// All particles were inconsistent with the measurement. `belief` then holds
  /// the prior weights unchanged and the caller must apply a recovery.
  bool degenerate = false;
};

/// Multiplies weights by exp(log_likelihoods) in log space and renormalizes.
inline UpdateOutcome reweight(const ParticleBelief& b, std::span<const double> log_likelihoods) {
  if (log_likelihoods.size() != b.size()) throw DomainError("likelihood count mismatch");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> logw(b.size());
  double max_logw = kNegInf;
  for (std::size_t j = 0; j < b.size(); ++j) {
    logw[j] = b.weights[j] > 0.0 ? std::log(b.weights[j]) + log_likelihoods[j] : kNegInf;
    max_logw = std::max(max_logw, logw[j]);
  }
  if (max_logw == kNegInf || std::isnan(max_logw)) return {b, true};
  ParticleBelief out = b;
  double total = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    out.weights[j] = logw[j] == kNegInf ? 0.0 : std::exp(logw[j] - max_logw);
    total += out.weights[j];
  }
  for (double& w : out.weights) w /= total;
  return {std::move(out), false};
}

/// Bayes update of the weights with measurement z (states unchanged).
inline UpdateOutcome update(const ParticleBelief& b, const Measurement& z, const RobotPose& robot,
                            const SensorConfig& sensor, const OccupancyGrid& map,
                            const MeasurementNoise& noise) {
  std::vector<double> loglik(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    loglik[j] = obs_log_likelihood(z, b.states[j], robot, sensor, map, noise);
  }
  return reweight(b, loglik);
}

/// Recovery for a degenerate posterior: uniform weight over the particles
/// outside the current FOV, or over all particles when none are outside.
inline ParticleBelief recover_degenerate(const ParticleBelief& b, const RobotPose& robot,
                                         const SensorConfig& sensor, const OccupancyGrid& map) {
  ParticleBelief out = b;
  std::size_t outside = 0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    const bool visible = point_visible(robot, b.states[j], sensor, map);
    out.weights[j] = visible ? 0.0 : 1.0;
    outside += visible ? 0 : 1;
  }
  if (outside == 0) std::fill(out.weights.begin(), out.weights.end(), 1.0);
  out.normalize();
  return out;
}

inline double ess(const ParticleBelief& b) {
  double sum_sq = 0.0;
  for (double w : b.weights) sum_sq += w * w;
  return 1.0 / sum_sq;
}

inline TargetState mean_estimate(const ParticleBelief& b) {
  TargetState m = TargetState::Zero();
  for (std::size_t j = 0; j < b.size(); ++j) m += b.weights[j] * b.states[j];
  return m;
}

inline Mat2 covariance_estimate(const ParticleBelief& b) {
  const TargetState m = mean_estimate(b);
  Mat2 c = Mat2::Zero();
  for (std::size_t j = 0; j < b.size(); ++j) {
    const Vec2 d = b.states[j] - m;
    c += b.weights[j] * d * d.transpose();
  }
  return c;
}

/// Systematic resampling with a fixed offset u in [0, 1/N).
inline ParticleBelief resample_low_variance_with_offset(const ParticleBelief& b, double offset) {
  const std::size_t n = b.size();
  const double step = 1.0 / static_cast<double>(n);
  ParticleBelief out;
  out.states.reserve(n);
  out.weights.assign(n, step);
  double cumulative = b.weights[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = offset + static_cast<double>(k) * step;
    while (u >= cumulative && i + 1 < n) {
      ++i;
      cumulative += b.weights[i];
    }
    out.states.push_back(b.states[i]);
  }
  return out;
}

inline ParticleBelief resample_low_variance(const ParticleBelief& b, Rng& rng) {
  std::uniform_real_distribution<double> offset(0.0, 1.0 / static_cast<double>(b.size()));
  return resample_low_variance_with_offset(b, offset(rng));
}

struct FilterStepConfig {
  double resample_ess_fraction = 0.5;
  bool predict = true;
};

struct FilterStepResult {
  ParticleBelief belief;
  bool degenerate = false;
  bool resampled = false;
};

/// One full filter cycle: predict, update, recover if degenerate, and resample
/// when ESS drops below the configured fraction of N.
inline FilterStepResult filter_step(const ParticleBelief& b, const Measurement& z,
                                    const RobotPose& robot, const SensorConfig& sensor,
                                    const OccupancyGrid& map, const Mat2& process_cov,
                                    const MeasurementNoise& noise, Rng& rng,
                                    const FilterStepConfig& cfg = {}) {
  FilterStepResult r;
  ParticleBelief predicted = cfg.predict ? predict(b, process_cov, rng) : b;
  UpdateOutcome upd = update(predicted, z, robot, sensor, map, noise);
  r.degenerate = upd.degenerate;
  r.belief = upd.degenerate ? recover_degenerate(upd.belief, robot, sensor, map)
                            : std::move(upd.belief);
  if (ess(r.belief) < cfg.resample_ess_fraction * static_cast<double>(r.belief.size())) {
    r.belief = resample_low_variance(r.belief, rng);
    r.resampled = true;
  }
  return r;
}

}  // namespace respire
