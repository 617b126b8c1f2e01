#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "respire/mi_reward.hpp"

using namespace respire;

namespace {

const Mat2 kSigma = (Mat2() << 0.1, 0.0, 0.0, 0.01).finished();

OccupancyGrid open_map() { return OccupancyGrid(40, 40, 1.0, Vec2(-20, -20), Cell::Free); }

ModelConfig models() {
  ModelConfig m;
  m.noise.measurement = kSigma;
  return m;
}

PredictedGmm one_dim(std::vector<double> means, std::vector<double> weights, double var,
                     double p_empty) {
  Eigen::MatrixXd mu(1, static_cast<Eigen::Index>(means.size()));
  for (std::size_t i = 0; i < means.size(); ++i) mu(0, static_cast<Eigen::Index>(i)) = means[i];
  return PredictedGmm::from_components(mu, std::move(weights), Eigen::MatrixXd::Constant(1, 1, var),
                                       p_empty);
}

double gaussian_entropy(const Eigen::MatrixXd& cov) {
  const double m = static_cast<double>(cov.rows());
  return 0.5 * std::log(std::pow(2.0 * kPi * std::exp(1.0), m) * cov.determinant());
}

}  // namespace

TEST(SigmaPoints, OneDimensionalExample) {
  const auto s = sigma_points(Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 4.0), 1.0);
  ASSERT_EQ(s.points.cols(), 3);
  EXPECT_DOUBLE_EQ(s.points(0, 0), 0.0);
  EXPECT_NEAR(s.points(0, 1), std::sqrt(8.0), 1e-14);
  EXPECT_NEAR(s.points(0, 2), -std::sqrt(8.0), 1e-14);
  EXPECT_DOUBLE_EQ(s.weights(0), 0.5);
  EXPECT_DOUBLE_EQ(s.weights(1), 0.25);
  EXPECT_DOUBLE_EQ(s.weights(2), 0.25);
  double var = 0.0;
  for (int l = 0; l < 3; ++l) var += s.weights(l) * s.points(0, l) * s.points(0, l);
  EXPECT_NEAR(var, 4.0, 1e-13);
}

TEST(SigmaPoints, RejectsNonSpd) {
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(sigma_points(Eigen::VectorXd::Zero(2), bad, 2.0), NumericError);
  EXPECT_THROW(sigma_points(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), -3.0),
               DomainError);
}

TEST(ConditionalEntropy, ClosedFormValues) {
  auto g = PredictedGmm::from_components(Eigen::MatrixXd::Zero(2, 1), {1.0}, kSigma, 0.0);
  EXPECT_NEAR(conditional_entropy(g), 1.0 + std::log(2.0 * kPi) + 0.5 * std::log(0.001), 1e-12);
  EXPECT_NEAR(conditional_entropy(g), -0.61600, 5e-6);
  g.weights = {0.5};
  g.p_empty = 0.5;
  EXPECT_NEAR(conditional_entropy(g), -0.30800, 5e-6);
  g.weights = {};
  g.means.resize(2, 0);
  g.p_empty = 1.0;
  EXPECT_EQ(conditional_entropy(g), 0.0);
}

TEST(SpEntropy, AllEmptyIsZero) {
  const auto g = one_dim({}, {}, 1.0, 1.0);
  EXPECT_EQ(sp_entropy(g), 0.0);
}

TEST(SpEntropy, NoComponentsWithMissingMassIsAnError) {
  const auto g = one_dim({}, {}, 1.0, 0.4);
  EXPECT_THROW(sp_entropy(g), std::logic_error);
}

TEST(SpEntropy, SingleGaussianIsExact) {
  MiConfig cfg;
  cfg.lambda = 1.0;
  const auto g = one_dim({3.0}, {1.0}, 4.0, 0.0);
  EXPECT_NEAR(sp_entropy(g, cfg), 0.5 * std::log(2.0 * kPi * std::exp(1.0) * 4.0), 1e-12);
  EXPECT_NEAR(sp_entropy(g, cfg), 2.11209, 5e-6);
}

TEST(SpEntropy, SeparatedPairAddsLogTwo) {
  auto g = PredictedGmm::from_components((Eigen::MatrixXd(2, 2) << 0.0, 30.0, 0.0, 0.0).finished(),
                                         {0.5, 0.5}, kSigma, 0.0);
  Rng rng(17);
  const McEstimate mc = mc_entropy(g, 1000000, rng);
  const double expected = gaussian_entropy(kSigma) + std::log(2.0);
  EXPECT_NEAR(mc.value, expected, 3.0 * mc.standard_error + 1e-6);
  EXPECT_NEAR(sp_entropy(g), expected, 1e-9);
}

TEST(SpEntropy, MixedTermIncludesEmptyAtom) {
  const auto g = one_dim({0.0}, {0.5}, 4.0, 0.5);
  MiConfig cfg;
  cfg.lambda = 1.0;
  // -p ln p for the atom plus the in-FOV mass times (Gaussian entropy - ln 0.5).
  const double h = 0.5 * std::log(2.0) + 0.5 * (0.5 * std::log(2.0 * kPi * std::exp(1.0) * 4.0) -
                                                 std::log(0.5));
  EXPECT_NEAR(sp_entropy(g, cfg), h, 1e-12);
}

TEST(McEntropy, AllEmptyIsZero) {
  Rng rng(1);
  const auto mc = mc_entropy(one_dim({}, {}, 1.0, 1.0), 1000, rng);
  EXPECT_EQ(mc.value, 0.0);
  EXPECT_EQ(mc.standard_error, 0.0);
}

TEST(McEntropy, SingleGaussianWithinThreeStandardErrors) {
  Rng rng(3);
  const auto mc = mc_entropy(one_dim({1.0}, {1.0}, 4.0, 0.0), 1000000, rng);
  EXPECT_GT(mc.standard_error, 0.0);
  EXPECT_NEAR(mc.value, 0.5 * std::log(2.0 * kPi * std::exp(1.0) * 4.0), 3.0 * mc.standard_error);
  EXPECT_NEAR(mc.value, 2.1121, 0.005);
}

TEST(McEntropy, SeedDeterminism) {
  const auto g = one_dim({0.0, 2.0}, {0.3, 0.7}, 1.0, 0.0);
  Rng a(9);
  Rng b(9);
  EXPECT_EQ(mc_entropy(g, 5000, a).value, mc_entropy(g, 5000, b).value);
}

TEST(Hessian, SingleComponentIsNegativePrecision) {
  auto g = PredictedGmm::from_components((Eigen::MatrixXd(2, 1) << 1.0, 0.2).finished(), {1.0},
                                         kSigma, 0.0);
  const Eigen::MatrixXd h = log_gmm_hessian(g, Eigen::Vector2d(3.0, -1.0));
  EXPECT_TRUE(h.isApprox(-Eigen::MatrixXd(kSigma.inverse()), 1e-12));
}

TEST(Hessian, MatchesFiniteDifferences) {
  Rng rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd mu(2, 2);
    mu << u(rng), u(rng), u(rng), u(rng);
    Eigen::MatrixXd cov(2, 2);
    const double a = 0.3 + 0.5 * (u(rng) + 1.0);
    const double c = 0.3 + 0.5 * (u(rng) + 1.0);
    const double b = 0.2 * u(rng);
    cov << a, b, b, c;
    const double w = 0.2 + 0.3 * (u(rng) + 1.0);
    const auto g = PredictedGmm::from_components(mu, {w, 1.0 - w}, cov, 0.0);
    const Eigen::Vector2d z(u(rng), u(rng));
    auto logp = [&](const Eigen::Vector2d& x) {
      double p = 0.0;
      const Eigen::MatrixXd prec = cov.inverse();
      for (int i = 0; i < 2; ++i) {
        const Eigen::Vector2d d = x - mu.col(i);
        p += g.weights[static_cast<std::size_t>(i)] * std::exp(-0.5 * d.dot(prec * d)) /
             (2.0 * kPi * std::sqrt(cov.determinant()));
      }
      return std::log(p);
    };
    const double h = 1e-4;
    Eigen::Matrix2d fd;
    for (int r = 0; r < 2; ++r) {
      for (int s = 0; s < 2; ++s) {
        const Eigen::Vector2d er = Eigen::Vector2d::Unit(r) * h;
        const Eigen::Vector2d es = Eigen::Vector2d::Unit(s) * h;
        fd(r, s) = (logp(z + er + es) - logp(z + er - es) - logp(z - er + es) + logp(z - er - es)) /
                   (4.0 * h * h);
      }
    }
    const Eigen::MatrixXd an = log_gmm_hessian(g, z);
    EXPECT_LE((an - fd).norm(), 1e-4 * an.norm()) << "trial " << trial;
  }
}

TEST(Hessian, SymmetricAtMidpoint) {
  const auto g = PredictedGmm::from_components(
      (Eigen::MatrixXd(2, 2) << -1.0, 1.0, 0.5, -0.5).finished(), {0.5, 0.5}, kSigma, 0.0);
  const Eigen::MatrixXd h = log_gmm_hessian(g, Eigen::Vector2d::Zero());
  EXPECT_NEAR(h(0, 1), h(1, 0), 1e-12);
}

TEST(Simplify, IdenticalParticlesMerge) {
  const auto b = ParticleBelief::uniform({Vec2(1.2, 3.4), Vec2(1.2, 3.4)});
  const auto s = simplify_particles(b, 1.0);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.states[0], Vec2(1.2, 3.4));
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0);
}

TEST(Simplify, DistantParticlesUnchanged) {
  ParticleBelief b({Vec2(0.5, 0.5), Vec2(3.5, 7.5), Vec2(-4.5, 2.5)}, {0.2, 0.5, 0.3});
  const auto s = simplify_particles(b, 1.0);
  ASSERT_EQ(s.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    bool found = false;
    for (std::size_t k = 0; k < 3; ++k) {
      if (s.states[k] == b.states[j]) {
        found = true;
        EXPECT_NEAR(s.weights[k], b.weights[j], 1e-15);
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST(Simplify, WeightedMeanOfACell) {
  ParticleBelief b({Vec2(0.1, 0.1), Vec2(0.3, 0.3)}, {0.25, 0.75});
  const auto s = simplify_particles(b, 1.0);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s.states[0].x(), 0.25, 1e-15);
  EXPECT_NEAR(s.states[0].y(), 0.25, 1e-15);
  EXPECT_DOUBLE_EQ(s.weights[0], 1.0);
}

TEST(PredictGmm, AllOutsideFov) {
  const auto map = open_map();
  JointBeliefState st{{0, 0, 0}, ParticleBelief::uniform({Vec2(-5, 0), Vec2(-6, 1)})};
  const auto g = predict_gmm(st, {0.0, 0.0}, map, models());
  EXPECT_EQ(g.size(), 0u);
  EXPECT_DOUBLE_EQ(g.p_empty, 1.0);
}

TEST(PredictGmm, SingleParticleInFov) {
  const auto map = open_map();
  JointBeliefState st{{0, 0, 0}, ParticleBelief::uniform({Vec2(4, 1)})};
  const RobotControl a{1.5, 0.0};
  const auto g = predict_gmm(st, a, map, models());
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g.p_empty, 0.0);
  const RobotPose next = step_robot(st.robot, a, 0.5);
  EXPECT_TRUE(g.means.col(0).isApprox(measurement_function(next, Vec2(4, 1)), 1e-15));
}

TEST(PredictGmm, HalfInHalfOut) {
  const auto map = open_map();
  JointBeliefState st{{0, 0, 0}, ParticleBelief::uniform({Vec2(4, 0), Vec2(-4, 0)})};
  const auto g = predict_gmm(st, {0.0, 0.0}, map, models());
  ASSERT_EQ(g.size(), 1u);
  EXPECT_DOUBLE_EQ(g.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(g.p_empty, 0.5);
  g.validate();
}

TEST(MiReward, AllOutsideIsExactlyZero) {
  const auto map = open_map();
  JointBeliefState st{{0, 0, 0}, ParticleBelief::uniform({Vec2(-5, 0), Vec2(-6, 1)})};
  EXPECT_EQ(mi_reward(st, {0.0, 0.0}, map, models()), 0.0);
}

TEST(MiReward, SingleParticleIsZero) {
  const auto map = open_map();
  JointBeliefState st{{0, 0, 0}, ParticleBelief::uniform({Vec2(4, 1)})};
  const auto br = mi_breakdown(st, {0.0, 0.0}, map, models());
  EXPECT_NEAR(br.raw, 0.0, 1e-9);
  EXPECT_NEAR(br.value, 0.0, 1e-9);
}

TEST(MiReward, SeparatedPairIsOneBitInNats) {
  const auto map = open_map();
  JointBeliefState st{{0, 0, 0}, ParticleBelief::uniform({Vec2(1.5, 0), Vec2(5.5, 0)})};
  const double mi = mi_reward(st, {0.0, 0.0}, map, models());
  // Oracle: Monte-Carlo entropy of the same mixture minus the conditional entropy.
  const auto g = predict_gmm(st, {0.0, 0.0}, map, models());
  Rng rng(5);
  const auto mc = mc_entropy(g, 1000000, rng);
  EXPECT_NEAR(mi, mc.value - conditional_entropy(g), 3.0 * mc.standard_error + 1e-6);
  EXPECT_NEAR(mi, std::log(2.0), 1e-3);
}

TEST(MiReward, BinaryVisibilityOnly) {
  const auto map = open_map();
  JointBeliefState st{{0, 0, 0}, ParticleBelief::uniform({Vec2(4, 0), Vec2(-4, 0)})};
  // One particle seen, one not: the atom resolves a fair coin.
  EXPECT_NEAR(mi_reward(st, {0.0, 0.0}, map, models()), std::log(2.0), 1e-9);
}

TEST(MiReward, TruncationMatchesPlainWhenRadiusCoversAll) {
  const auto map = open_map();
  std::vector<TargetState> s;
  Rng rng(8);
  for (int i = 0; i < 60; ++i) s.push_back(Vec2(4, 0) + 0.7 * standard_normal2(rng));
  JointBeliefState st{{0, 0, 0}, ParticleBelief::uniform(s)};
  MiConfig plain;
  MiConfig trunc;
  trunc.truncation_radius = 100.0;
  EXPECT_NEAR(mi_reward(st, {0.0, 0.0}, map, models(), plain),
              mi_reward(st, {0.0, 0.0}, map, models(), trunc), 1e-12);
}
