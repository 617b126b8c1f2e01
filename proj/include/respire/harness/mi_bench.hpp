#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "respire/belief.hpp"
#include "respire/mi_reward.hpp"
#include "respire/models.hpp"

namespace respire::harness {

/// Dispersion sweeps alpha in N([10, 0], alpha I); noise sweeps beta in beta * diag(0.1, 0.01).
enum class Sweep { Dispersion, Noise };

inline const char* to_string(Sweep s) { return s == Sweep::Dispersion ? "alpha" : "beta"; }

inline std::optional<Sweep> parse_sweep(const std::string& s) {
  if (s == "alpha") return Sweep::Dispersion;
  if (s == "beta") return Sweep::Noise;
  return std::nullopt;
}

enum class Estimator { SP, SPs, SPst, MC };

inline const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::SP: return "SP";
    case Estimator::SPs: return "SP-s";
    case Estimator::SPst: return "SP-st";
    case Estimator::MC: return "MC";
  }
  return "?";
}

inline std::optional<Estimator> parse_estimator(const std::string& s) {
  for (Estimator e : {Estimator::SP, Estimator::SPs, Estimator::SPst, Estimator::MC}) {
    if (s == to_string(e)) return e;
  }
  return std::nullopt;
}

inline Mat2 base_noise() { return (Mat2() << 0.1, 0.0, 0.0, 0.01).finished(); }

struct MiBenchConfig {
  Sweep sweep = Sweep::Dispersion;
  std::vector<double> values{0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<Estimator> estimators{Estimator::SP, Estimator::SPs, Estimator::SPst, Estimator::MC};
  std::size_t particles = 500;
  std::size_t mc_samples = 1000000;
  std::uint64_t seed = 1;
  double fixed_alpha = 1.0;  // dispersion held during a noise sweep
  double fixed_beta = 1.0;   // noise scale held during a dispersion sweep
  int timing_repeats = 5;    // wall time is the median over repeats
  double lambda = 1.0;
};

/// Simplification cell and truncation radius tied to the sensor noise:
/// l_f = 0.8 min(sigma_r, r0 sigma_b), rho = 5 max(sigma_r, r0 sigma_b), with
/// r0 = 10 m the sweep's nominal range.
struct SimplifySettings {
  double fine_cell = 0.0;
  double truncation_radius = 0.0;
};

inline SimplifySettings simplify_settings(const Mat2& noise) {
  const double sigma_r = std::sqrt(noise(0, 0));
  const double sigma_b = 10.0 * std::sqrt(noise(1, 1));
  return {0.8 * std::min(sigma_r, sigma_b), 5.0 * std::max(sigma_r, sigma_b)};
}

struct MiBenchPoint {
  double param = 0.0;
  ParticleBelief particles;
  Mat2 noise = Mat2::Identity();
};

/// Particles for one sweep point; all points of a sweep draw from the same seed.
inline MiBenchPoint bench_point(const MiBenchConfig& cfg, double value) {
  MiBenchPoint p;
  p.param = value;
  const double alpha = cfg.sweep == Sweep::Dispersion ? value : cfg.fixed_alpha;
  const double beta = cfg.sweep == Sweep::Noise ? value : cfg.fixed_beta;
  if (!(alpha > 0.0) || !(beta > 0.0)) throw DomainError("sweep values must be > 0");
  p.noise = beta * base_noise();
  Rng rng(cfg.seed);
  std::vector<TargetState> states;
  states.reserve(cfg.particles);
  const double s = std::sqrt(alpha);
  for (std::size_t i = 0; i < cfg.particles; ++i) {
    states.push_back(Vec2(10.0, 0.0) + s * standard_normal2(rng));
  }
  p.particles = ParticleBelief::uniform(std::move(states));
  return p;
}

/// Predicted mixture seen from the robot at (0, 0, 0) with every particle in view.
inline PredictedGmm full_view_gmm(const ParticleBelief& b, const Mat2& noise) {
  const RobotPose robot{0.0, 0.0, 0.0};
  PredictedGmm g;
  g.cov = noise;
  g.p_empty = 0.0;
  g.means.resize(2, static_cast<Eigen::Index>(b.size()));
  g.sources.resize(2, static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) {
    g.means.col(static_cast<Eigen::Index>(i)) = measurement_function(robot, b.states[i]);
    g.sources.col(static_cast<Eigen::Index>(i)) = b.states[i];
    g.weights.push_back(b.weights[i]);
  }
  return g;
}

/// One estimator on one point, starting from raw particles so that the
/// simplification cost is included in the timing.
inline double estimate_entropy(Estimator e, const MiBenchPoint& p, const MiBenchConfig& cfg,
                               Rng& rng, double* standard_error = nullptr) {
  const SimplifySettings ss = simplify_settings(p.noise);
  MiConfig mi;
  mi.lambda = cfg.lambda;
  switch (e) {
    case Estimator::SP:
      return sp_entropy(full_view_gmm(p.particles, p.noise), mi);
    case Estimator::SPs:
      return sp_entropy(full_view_gmm(simplify_particles(p.particles, ss.fine_cell), p.noise), mi);
    case Estimator::SPst:
      mi.truncation_radius = ss.truncation_radius;
      return sp_entropy(full_view_gmm(simplify_particles(p.particles, ss.fine_cell), p.noise), mi);
    case Estimator::MC: {
      const McEstimate mc = mc_entropy(full_view_gmm(p.particles, p.noise), cfg.mc_samples, rng);
      if (standard_error) *standard_error = mc.standard_error;
      return mc.value;
    }
  }
  return 0.0;
}

struct MiBenchRow {
  Estimator estimator = Estimator::SP;
  Sweep sweep = Sweep::Dispersion;
  double param = 0.0;
  double entropy = 0.0;
  double abs_error_vs_mc = 0.0;
  double mc_standard_error = 0.0;
  std::int64_t wall_time_ns = 0;
};

/// Rows in sweep order, then estimator order. The MC reference (seeded by
/// cfg.seed) is computed once per point whenever any estimator is requested.
inline std::vector<MiBenchRow> run_mi_bench(const MiBenchConfig& cfg) {
  if (cfg.values.empty()) throw DomainError("mi bench sweep is empty");
  std::vector<MiBenchRow> rows;
  if (cfg.estimators.empty()) return rows;
  for (double v : cfg.values) {
    const MiBenchPoint p = bench_point(cfg, v);
    Rng mc_rng(cfg.seed + 1);
    double se = 0.0;
    const auto m0 = std::chrono::steady_clock::now();
    const double reference = estimate_entropy(Estimator::MC, p, cfg, mc_rng, &se);
    const auto mc_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - m0)
            .count();
    for (Estimator e : cfg.estimators) {
      MiBenchRow row;
      row.estimator = e;
      row.sweep = cfg.sweep;
      row.param = v;
      row.mc_standard_error = se;
      if (e == Estimator::MC) {
        row.entropy = reference;
        row.wall_time_ns = mc_ns;
        rows.push_back(row);
        continue;
      }
      std::vector<std::int64_t> times;
      const int repeats = std::max(1, cfg.timing_repeats);
      for (int r = 0; r < repeats; ++r) {
        Rng rng(cfg.seed + 1);
        const auto t0 = std::chrono::steady_clock::now();
        row.entropy = estimate_entropy(e, p, cfg, rng);
        times.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
      }
      std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2),
                       times.end());
      row.wall_time_ns = times[times.size() / 2];
      row.abs_error_vs_mc = std::abs(row.entropy - reference);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace respire::harness
