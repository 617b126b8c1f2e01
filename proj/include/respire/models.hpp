#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include "respire/common.hpp"
#include "respire/environment.hpp"

namespace respire {

using TargetState = Vec2;

struct RobotControl {
  double v = 0.0;  // m/s
  double w = 0.0;  // rad/s
  friend bool operator==(const RobotControl&, const RobotControl&) = default;
};

struct ControlLimits {
  double v_min = 0.0;
  double v_max = 3.0;
  double w_min = -kPi / 3.0;
  double w_max = kPi / 3.0;

  bool admits(const RobotControl& u, double tol = 1e-9) const {
    return u.v >= v_min - tol && u.v <= v_max + tol && u.w >= w_min - tol && u.w <= w_max + tol;
  }
};

/// Process (target random-walk) and measurement (range, bearing) covariances.
struct NoiseModel {
  Mat2 process = Mat2::Identity() * 0.01;
  Mat2 measurement = (Mat2() << 0.1, 0.0, 0.0, 0.01).finished();

  void validate() const {
    cholesky_factor(process, "process covariance Q");
    cholesky_factor(measurement, "measurement covariance Sigma");
  }
};

/// Range-bearing detection or the empty (no-detection) outcome.
class Measurement {
 public:
  Measurement() = default;
  static Measurement empty() { return {}; }
  static Measurement detection(double range, double bearing) {
    Measurement m;
    m.value_ = Vec2(range, wrap_angle(bearing));
    return m;
  }
  static Measurement detection(const Vec2& z) { return detection(z.x(), z.y()); }

  bool is_detection() const { return value_.has_value(); }
  bool is_empty() const { return !value_.has_value(); }
  const Vec2& z() const { return *value_; }
  double range() const { return value_->x(); }
  double bearing() const { return value_->y(); }

  friend bool operator==(const Measurement& a, const Measurement& b) {
    if (a.is_detection() != b.is_detection()) return false;
    return a.is_empty() || *a.value_ == *b.value_;
  }

 private:
  std::optional<Vec2> value_;
};

/// Everything the planner needs to simulate the robot and its camera.
struct ModelConfig {
  ControlLimits limits;
  double dt = 0.5;
  NoiseModel noise;
  SensorConfig camera{6.0, kPi / 4.0, SensorKind::Camera};
  double robot_radius = 0.3;
};

/// Unicycle step: x += v cos(theta) dt, y += v sin(theta) dt, theta += w dt.
inline RobotPose step_robot(const RobotPose& pose, const RobotControl& u, double dt,
                            const ControlLimits& limits = {}) {
  if (!(dt > 0.0)) throw DomainError("dt must be > 0");
  if (!limits.admits(u)) throw DomainError("control outside limits");
  return {pose.x + u.v * std::cos(pose.theta) * dt, pose.y + u.v * std::sin(pose.theta) * dt,
          wrap_angle(pose.theta + u.w * dt)};
}

/// Range-bearing observation function h(robot, target).
inline Vec2 measurement_function(const RobotPose& robot, const TargetState& target) {
  const Vec2 d = target - robot.position();
  return {d.norm(), angle_diff(std::atan2(d.y(), d.x()), robot.theta)};
}

/// Filter-side target transition: random walk (identity mean) plus N(0, Q).
inline TargetState step_target_model(const TargetState& s, const Mat2& process_cov, Rng& rng) {
  const Mat2 chol = cholesky_factor(process_cov, "process covariance Q");
  return s + chol * standard_normal2(rng);
}

/// Gaussian measurement noise with the factorizations precomputed.
struct MeasurementNoise {
  Mat2 cov;
  Mat2 chol;
  Mat2 information;
  double log_normalizer = 0.0;  // -log(2 pi sqrt|Sigma|)

  explicit MeasurementNoise(const Mat2& sigma)
      : cov(sigma), chol(cholesky_factor(sigma, "measurement covariance Sigma")) {
    information = sigma.inverse();
    log_normalizer = -std::log(2.0 * kPi) - std::log(chol(0, 0)) - std::log(chol(1, 1));
  }

  /// log N(z; mean, Sigma) with the bearing residual wrapped.
  double log_density(const Vec2& z, const Vec2& mean) const {
    const Vec2 r(z.x() - mean.x(), angle_diff(z.y(), mean.y()));
    return log_normalizer - 0.5 * r.dot(information * r);
  }
};

/// Simulated camera: Empty outside the FOV, otherwise h + N(0, Sigma).
inline Measurement observe(const RobotPose& robot, const TargetState& target,
                           const SensorConfig& sensor, const OccupancyGrid& map,
                           const MeasurementNoise& noise, Rng& rng) {
  if (!point_visible(robot, target, sensor, map)) return Measurement::empty();
  const Vec2 z = measurement_function(robot, target) + noise.chol * standard_normal2(rng);
  return Measurement::detection(std::max(0.0, z.x()), z.y());
}

inline Measurement observe(const RobotPose& robot, const TargetState& target,
                           const SensorConfig& sensor, const OccupancyGrid& map, const Mat2& sigma,
                           Rng& rng) {
  return observe(robot, target, sensor, map, MeasurementNoise(sigma), rng);
}

/// log P(z | target) given the FOV indicator for the target; -inf for
/// impossible events.
inline double obs_log_likelihood(const Measurement& z, bool target_in_fov, const RobotPose& robot,
                                 const TargetState& target, const MeasurementNoise& noise) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (!target_in_fov) return z.is_empty() ? 0.0 : kNegInf;
  if (z.is_empty()) return kNegInf;
  return noise.log_density(z.z(), measurement_function(robot, target));
}

inline double obs_log_likelihood(const Measurement& z, const TargetState& target,
                                 const RobotPose& robot, const SensorConfig& sensor,
                                 const OccupancyGrid& map, const MeasurementNoise& noise) {
  return obs_log_likelihood(z, point_visible(robot, target, sensor, map), robot, target, noise);
}

inline double obs_log_likelihood(const Measurement& z, const TargetState& target,
                                 const RobotPose& robot, const SensorConfig& sensor,
                                 const OccupancyGrid& map, const Mat2& sigma) {
  return obs_log_likelihood(z, target, robot, sensor, map, MeasurementNoise(sigma));
}

}  // namespace respire
