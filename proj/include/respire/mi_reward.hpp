#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "respire/belief.hpp"
#include "respire/common.hpp"
#include "respire/environment.hpp"
#include "respire/grid_cluster.hpp"
#include "respire/models.hpp"

namespace respire {

/// Predicted measurement distribution: a Gaussian mixture over the in-FOV
/// particles (shared covariance) plus the probability mass of "no detection".
struct PredictedGmm {
  Eigen::MatrixXd means;        // m x n, one column per in-FOV particle
  std::vector<double> weights;  // raw particle weights, not renormalized
  Eigen::MatrixXd cov;          // m x m, shared by all components
  double p_empty = 1.0;
  Eigen::Matrix2Xd sources;     // 2 x n, source particle positions

  int dim() const { return static_cast<int>(cov.rows()); }
  std::size_t size() const { return weights.size(); }
  double in_fov_mass() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

  void validate() const {
    if (cov.rows() != cov.cols() || cov.rows() < 1) throw DomainError("covariance must be square");
    if (static_cast<std::size_t>(means.cols()) != weights.size() || means.rows() != cov.rows()) {
      throw DomainError("mixture means/weights/covariance shape mismatch");
    }
    if (std::abs(p_empty + in_fov_mass() - 1.0) > 1e-9) {
      throw DomainError("mixture mass and p_empty must sum to 1");
    }
  }

  /// Builds a mixture directly from measurement-space means (sources default
  /// to the origin, which disables truncation effects).
  static PredictedGmm from_components(const Eigen::MatrixXd& means, std::vector<double> weights,
                                      const Eigen::MatrixXd& cov, double p_empty) {
    PredictedGmm g;
    g.means = means;
    g.weights = std::move(weights);
    g.cov = cov;
    g.p_empty = p_empty;
    g.sources = Eigen::Matrix2Xd::Zero(2, means.cols());
    return g;
  }
};

struct SigmaPointSet {
  Eigen::MatrixXd points;   // m x (2m+1)
  Eigen::VectorXd weights;  // 2m+1
  double lambda = 0.0;
};

struct MiConfig {
  double lambda = 1.0;
  double simplify_cell = 0.0;  // 0 disables particle simplification
  double truncation_radius = std::numeric_limits<double>::infinity();
  double negative_tolerance = 0.02;

  void validate(int m = 2) const {
    if (!(lambda + m > 0.0)) throw DomainError("lambda + m must be > 0");
    if (simplify_cell < 0.0) throw DomainError("simplify_cell must be >= 0");
    if (!(truncation_radius > 0.0)) throw DomainError("truncation_radius must be > 0");
  }
};

/// Symmetric square root of an SPD matrix.
inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0) ||
      !a.isApprox(a.transpose(), 1e-9)) {
    throw NumericError("matrix is not symmetric positive definite");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

/// 2m+1 points: mu, then mu +/- columns of sqrt((lambda+m) Sigma); weights
/// lambda/(lambda+m) for the center and 1/(2(lambda+m)) for the others.
inline SigmaPointSet sigma_points(const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                                  double lambda) {
  const int m = static_cast<int>(mu.size());
  if (sigma.rows() != m || sigma.cols() != m) throw DomainError("sigma shape mismatch");
  if (!(lambda + m > 0.0)) throw DomainError("lambda + m must be > 0");
  const Eigen::MatrixXd root = symmetric_sqrt((lambda + m) * sigma);
  SigmaPointSet s;
  s.lambda = lambda;
  s.points.resize(m, 2 * m + 1);
  s.weights.resize(2 * m + 1);
  s.points.col(0) = mu;
  s.weights(0) = lambda / (lambda + m);
  for (int l = 0; l < m; ++l) {
    s.points.col(1 + l) = mu + root.col(l);
    s.points.col(1 + m + l) = mu - root.col(l);
    s.weights(1 + l) = s.weights(1 + m + l) = 1.0 / (2.0 * (lambda + m));
  }
  return s;
}

namespace detail {

/// Mixture evaluated in whitened coordinates y = L^-1 z, Sigma = L L^T, so
/// each component log-density is log_norm - |y - y_i|^2 / 2.
class WhitenedMixture {
 public:
  explicit WhitenedMixture(const PredictedGmm& g) : m_(g.dim()) {
    Eigen::LLT<Eigen::MatrixXd> llt(g.cov);
    if (llt.info() != Eigen::Success || !g.cov.isApprox(g.cov.transpose(), 1e-9)) {
      throw NumericError("mixture covariance is not symmetric positive definite");
    }
    chol_ = llt.matrixL();
    whitened_ = chol_.triangularView<Eigen::Lower>().solve(g.means);
    log_weights_.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      log_weights_[i] = g.weights[i] > 0.0 ? std::log(g.weights[i])
                                            : -std::numeric_limits<double>::infinity();
    }
    log_norm_ = -0.5 * m_ * std::log(2.0 * kPi) - chol_.diagonal().array().log().sum();
    scratch_.resize(g.size());
  }

  int dim() const { return m_; }
  const Eigen::MatrixXd& whitened() const { return whitened_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  double log_norm() const { return log_norm_; }

  Eigen::MatrixXd whiten(const Eigen::MatrixXd& z) const {
    return chol_.triangularView<Eigen::Lower>().solve(z);
  }

  /// log sum_i w_i N(.) at whitened point y over components [0, count) of the
  /// given whitened means / log weights.
  double log_density(const double* y, const double* means, const double* logw,
                     std::size_t count) const {
    if (scratch_.size() < count) scratch_.resize(count);
    double best = -std::numeric_limits<double>::infinity();
    if (m_ == 2) {
      const double y0 = y[0];
      const double y1 = y[1];
      for (std::size_t i = 0; i < count; ++i) {
        const double d0 = y0 - means[2 * i];
        const double d1 = y1 - means[2 * i + 1];
        const double t = logw[i] - 0.5 * (d0 * d0 + d1 * d1);
        scratch_[i] = t;
        best = std::max(best, t);
      }
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        double q = 0.0;
        for (int k = 0; k < m_; ++k) {
          const double d = y[k] - means[static_cast<std::size_t>(m_) * i + k];
          q += d * d;
        }
        const double t = logw[i] - 0.5 * q;
        scratch_[i] = t;
        best = std::max(best, t);
      }
    }
    if (best == -std::numeric_limits<double>::infinity()) return best;
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) sum += std::exp(scratch_[i] - best);
    return best + std::log(sum) + log_norm_;
  }

  double log_density(const double* y) const {
    return log_density(y, whitened_.data(), log_weights_.data(), log_weights_.size());
  }

 private:
  int m_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd whitened_;
  std::vector<double> log_weights_;
  double log_norm_ = 0.0;
  mutable std::vector<double> scratch_;
};

inline double plogp_term(double p) { return p > 0.0 ? -p * std::log(p) : 0.0; }

}  // namespace detail

/// H(z | x): (1 - p_empty) [m/2 (ln 2pi + 1) + 1/2 ln|Sigma|], in nats.
inline double conditional_entropy(const PredictedGmm& g) {
  const int m = g.dim();
  const double gaussian = 0.5 * m * (std::log(2.0 * kPi) + 1.0) + 0.5 * std::log(g.cov.determinant());
  return (1.0 - g.p_empty) * gaussian;
}

/// Sigma-point approximation of H(z) for the mixed discrete/continuous
/// measurement: -p_empty ln p_empty + H_r, where H_r sums, per component j
/// weighted by w_j, the sigma-point average of -ln p_r. With a finite
/// truncation radius, p_r at component j's sigma points only includes
/// components whose source particle lies within that radius.
inline double sp_entropy(const PredictedGmm& g, const MiConfig& cfg = {}) {
  if (g.size() == 0) {
    if (g.p_empty < 1.0 - 1e-9) {
      throw std::logic_error("sp_entropy: no components but p_empty < 1");
    }
    return 0.0;
  }
  const int m = g.dim();
  const detail::WhitenedMixture mix(g);
  const SigmaPointSet unit = sigma_points(Eigen::VectorXd::Zero(m), g.cov, cfg.lambda);
  // Sigma-point displacements in whitened coordinates, shared by all components.
  const Eigen::MatrixXd offsets = mix.whiten(unit.points);
  const int npts = 2 * m + 1;
  const bool truncate = std::isfinite(cfg.truncation_radius);

  const double r2 = cfg.truncation_radius * cfg.truncation_radius;
  const double* src = g.sources.data();
  std::vector<double> sub_means;
  std::vector<double> sub_logw;
  if (truncate) {
    sub_means.reserve(g.size() * static_cast<std::size_t>(m));
    sub_logw.reserve(g.size());
  }

  Eigen::VectorXd y(m);
  double h_r = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    if (!(g.weights[j] > 0.0)) continue;
    const double* means = mix.whitened().data();
    const double* logw = mix.log_weights().data();
    std::size_t count = g.size();
    if (truncate) {
      sub_means.clear();
      sub_logw.clear();
      const double sx = src[2 * j];
      const double sy = src[2 * j + 1];
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double dx = src[2 * i] - sx;
        const double dy = src[2 * i + 1] - sy;
        if (dx * dx + dy * dy > r2) continue;
        for (int d = 0; d < m; ++d) sub_means.push_back(means[i * static_cast<std::size_t>(m) + d]);
        sub_logw.push_back(logw[i]);
      }
      means = sub_means.data();
      logw = sub_logw.data();
      count = sub_logw.size();
    }
    double acc = 0.0;
    for (int l = 0; l < npts; ++l) {
      y = mix.whitened().col(static_cast<Eigen::Index>(j)) + offsets.col(l);
      acc += unit.weights(l) * mix.log_density(y.data(), means, logw, count);
    }
    h_r -= g.weights[j] * acc;
  }
  return detail::plogp_term(g.p_empty) + h_r;
}

/// Monte-Carlo estimate of H(z) with its standard error. Uses a direct
/// precision-matrix evaluation of the mixture density.
struct McEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

inline McEstimate mc_entropy(const PredictedGmm& g, std::size_t n_samples, Rng& rng) {
  if (n_samples < 1) throw DomainError("mc_entropy needs at least one sample");
  const double in_fov = 1.0 - g.p_empty;
  if (g.size() == 0 || in_fov <= 0.0) return {detail::plogp_term(g.p_empty), 0.0};
  const int m = g.dim();
  const Eigen::MatrixXd precision = g.cov.inverse();
  const double log_norm = -0.5 * m * std::log(2.0 * kPi) - 0.5 * std::log(g.cov.determinant());
  const Eigen::MatrixXd chol = Eigen::MatrixXd(g.cov.llt().matrixL());
  std::vector<double> logw(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    logw[i] = g.weights[i] > 0.0 ? std::log(g.weights[i]) : -std::numeric_limits<double>::infinity();
  }
  std::discrete_distribution<std::size_t> pick(g.weights.begin(), g.weights.end());
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> terms(g.size());
  Eigen::VectorXd eps(m);
  Eigen::VectorXd z(m);
  Eigen::VectorXd d(m);

  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::size_t c = pick(rng);
    for (int k = 0; k < m; ++k) eps(k) = n01(rng);
    z = g.means.col(static_cast<Eigen::Index>(c)) + chol * eps;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double q = 0.0;
      for (int a = 0; a < m; ++a) {
        const double da = z(a) - g.means(a, static_cast<Eigen::Index>(i));
        for (int b = 0; b < m; ++b) {
          q += da * precision(a, b) * (z(b) - g.means(b, static_cast<Eigen::Index>(i)));
        }
      }
      terms[i] = logw[i] - 0.5 * q;
      best = std::max(best, terms[i]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    const double log_p = best + std::log(acc) + log_norm;
    sum += log_p;
    sum_sq += log_p * log_p;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {detail::plogp_term(g.p_empty) - in_fov * mean, in_fov * std::sqrt(var / n)};
}

/// Closed-form Hessian of ln p_r at z:
/// p^-2 sum_i sum_j chi_i chi_j Sigma^-1 (mu_j - mu_i) mu_j^T Sigma^-1 - Sigma^-1,
/// with chi_i = w_i N(z; mu_i, Sigma).
inline Eigen::MatrixXd log_gmm_hessian(const PredictedGmm& g, const Eigen::VectorXd& z) {
  if (g.size() == 0 || !(g.p_empty < 1.0)) throw DomainError("hessian needs in-FOV mass");
  const Eigen::MatrixXd precision = g.cov.inverse();
  const std::size_t n = g.size();
  std::vector<double> log_chi(n);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd d = z - g.means.col(static_cast<Eigen::Index>(i));
    log_chi[i] = (g.weights[i] > 0.0 ? std::log(g.weights[i])
                                     : -std::numeric_limits<double>::infinity()) -
                 0.5 * d.dot(precision * d);
    best = std::max(best, log_chi[i]);
  }
  // Common scale factors cancel in p^-2 chi_i chi_j.
  std::vector<double> chi(n);
  double p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    chi[i] = std::exp(log_chi[i] - best);
    p += chi[i];
  }
  const int m = g.dim();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const Eigen::VectorXd mu_i = g.means.col(static_cast<Eigen::Index>(i));
      const Eigen::VectorXd mu_j = g.means.col(static_cast<Eigen::Index>(j));
      acc += chi[i] * chi[j] * (mu_j - mu_i) * mu_j.transpose();
    }
  }
  return precision * acc * precision / (p * p) - precision;
}

/// Merges particles that share a cell of an origin-anchored grid of side
/// `cell` into their weighted mean carrying the summed weight.
inline ParticleBelief simplify_particles(const ParticleBelief& b, double cell) {
  return belief_from_clusters(cluster_by_grid(b, cell));
}

/// Measurement-space mixture after applying action `a`: robot stepped, particles
/// advanced by the mean (identity) dynamics, weights kept.
inline PredictedGmm predict_gmm(const JointBeliefState& state, const RobotControl& a,
                                const OccupancyGrid& map, const ModelConfig& models) {
  const RobotPose next = step_robot(state.robot, a, models.dt, models.limits);
  const ParticleBelief& b = state.belief;
  PredictedGmm g;
  g.cov = models.noise.measurement;
  g.p_empty = 0.0;
  std::vector<Vec2> means;
  std::vector<Vec2> sources;
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (!(b.weights[j] > 0.0)) continue;
    if (point_visible(next, b.states[j], models.camera, map)) {
      means.push_back(measurement_function(next, b.states[j]));
      sources.push_back(b.states[j]);
      g.weights.push_back(b.weights[j]);
    } else {
      g.p_empty += b.weights[j];
    }
  }
  g.means.resize(2, static_cast<Eigen::Index>(means.size()));
  g.sources.resize(2, static_cast<Eigen::Index>(sources.size()));
  for (std::size_t i = 0; i < means.size(); ++i) {
    g.means.col(static_cast<Eigen::Index>(i)) = means[i];
    g.sources.col(static_cast<Eigen::Index>(i)) = sources[i];
  }
  return g;
}

struct MiBreakdown {
  double value = 0.0;  // clamped reward
  double raw = 0.0;    // H(z) - H(z|x) before clamping
  double entropy = 0.0;
  double conditional = 0.0;
  std::size_t components = 0;
  bool beyond_tolerance = false;  // raw < -negative_tolerance
};

/// I(x; z) = H(z) - H(z | x) for the belief after action `a`. Small negative
/// values are approximation error and clamp to 0; larger ones are flagged.
inline MiBreakdown mi_breakdown(const JointBeliefState& state, const RobotControl& a,
                                const OccupancyGrid& map, const ModelConfig& models,
                                const MiConfig& cfg = {}) {
  MiBreakdown out;
  PredictedGmm g;
  if (cfg.simplify_cell > 0.0) {
    JointBeliefState simplified{state.robot, simplify_particles(state.belief, cfg.simplify_cell)};
    g = predict_gmm(simplified, a, map, models);
  } else {
    g = predict_gmm(state, a, map, models);
  }
  out.components = g.size();
  if (g.size() == 0) return out;
  out.entropy = sp_entropy(g, cfg);
  out.conditional = conditional_entropy(g);
  out.raw = out.entropy - out.conditional;
  out.beyond_tolerance = out.raw < -cfg.negative_tolerance;
  out.value = std::max(0.0, out.raw);
  return out;
}

inline double mi_reward(const JointBeliefState& state, const RobotControl& a,
                        const OccupancyGrid& map, const ModelConfig& models,
                        const MiConfig& cfg = {}) {
  return mi_breakdown(state, a, map, models, cfg).value;
}

}  // namespace respire
