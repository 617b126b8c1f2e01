#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "respire/belief.hpp"
#include "respire/grid_cluster.hpp"

using namespace respire;

namespace {

OccupancyGrid open_map() { return OccupancyGrid(40, 40, 1.0, Vec2(-20, -20), Cell::Free); }

const Mat2 kSigma = (Mat2() << 0.1, 0.0, 0.0, 0.01).finished();

std::size_t copies_of(const ParticleBelief& b, const Vec2& s) {
  std::size_t n = 0;
  for (const auto& x : b.states) n += x == s ? 1 : 0;
  return n;
}

}  // namespace

TEST(Predict, VanishingNoiseKeepsStates) {
  Rng rng(1);
  const auto b = ParticleBelief::uniform({Vec2(1, 2), Vec2(-3, 4)});
  const auto out = predict(b, Mat2::Identity() * 1e-20, rng);
  for (std::size_t j = 0; j < b.size(); ++j) {
    EXPECT_NEAR((out.states[j] - b.states[j]).norm(), 0.0, 1e-8);
    EXPECT_EQ(out.weights[j], b.weights[j]);
  }
}

TEST(Predict, ReplicatedCloudCovarianceMatchesQ) {
  Rng rng(2);
  const Mat2 q = (Mat2() << 0.5, 0.2, 0.2, 0.3).finished();
  const std::size_t n = 100000;
  const auto b = ParticleBelief::uniform(std::vector<TargetState>(n, Vec2(1, -1)));
  const auto out = predict(b, q, rng);
  const Mat2 cov = covariance_estimate(out);
  EXPECT_NEAR((mean_estimate(out) - Vec2(1, -1)).norm(), 0.0, 0.01);
  EXPECT_NEAR(cov(0, 0), 0.5, 0.01);
  EXPECT_NEAR(cov(0, 1), 0.2, 0.01);
  EXPECT_NEAR(cov(1, 1), 0.3, 0.01);
}

TEST(Update, EmptyWithAllOutsideKeepsWeights) {
  const auto map = open_map();
  ParticleBelief b({Vec2(-5, 0), Vec2(-4, 1)}, {0.3, 0.7});
  const auto out = update(b, Measurement::empty(), {0, 0, 0}, SensorConfig{}, map,
                          MeasurementNoise(kSigma));
  EXPECT_FALSE(out.degenerate);
  EXPECT_NEAR(out.belief.weights[0], 0.3, 1e-15);
  EXPECT_NEAR(out.belief.weights[1], 0.7, 1e-15);
}

TEST(Update, EmptyWithOneInsideZeroesIt) {
  const auto map = open_map();
  const auto b = ParticleBelief::uniform({Vec2(3, 0), Vec2(-3, 0)});
  const auto out = update(b, Measurement::empty(), {0, 0, 0}, SensorConfig{}, map,
                          MeasurementNoise(kSigma));
  EXPECT_EQ(out.belief.weights[0], 0.0);
  EXPECT_EQ(out.belief.weights[1], 1.0);
}

TEST(Update, DetectionWeightsFollowLikelihoodRatio) {
  const auto map = open_map();
  const RobotPose robot{0, 0, 0};
  const auto b = ParticleBelief::uniform({Vec2(4, 0), Vec2(5, 0)});
  const auto z = Measurement::detection(4.0, 0.0);
  const auto out = update(b, z, robot, SensorConfig{}, map, MeasurementNoise(kSigma));
  // Range residuals 0 and 1 with variance 0.1: odds e^5.
  EXPECT_NEAR(out.belief.weights[0], 1.0 / (1.0 + std::exp(-5.0)), 1e-12);
}

TEST(Update, InconsistentMeasurementIsDegenerate) {
  const auto map = open_map();
  const RobotPose robot{0, 0, 0};
  const auto b = ParticleBelief::uniform({Vec2(-4, 0), Vec2(-5, 0), Vec2(4, 0)});
  ParticleBelief outside({Vec2(-4, 0), Vec2(-5, 0)}, {0.5, 0.5});
  const auto out = update(outside, Measurement::detection(4, 0), robot, SensorConfig{}, map,
                          MeasurementNoise(kSigma));
  EXPECT_TRUE(out.degenerate);
  EXPECT_EQ(out.belief.weights, outside.weights);

  const auto rec = recover_degenerate(b, robot, SensorConfig{}, map);
  EXPECT_NEAR(rec.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(rec.weights[1], 0.5, 1e-15);
  EXPECT_EQ(rec.weights[2], 0.0);
}

TEST(Update, RecoveryWithEverythingVisibleIsUniform) {
  const auto map = open_map();
  ParticleBelief b({Vec2(3, 0), Vec2(4, 0)}, {0.9, 0.1});
  const auto rec = recover_degenerate(b, {0, 0, 0}, SensorConfig{}, map);
  EXPECT_NEAR(rec.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(rec.weights[1], 0.5, 1e-15);
}

TEST(Reweight, SizeMismatchThrows) {
  const auto b = ParticleBelief::uniform({Vec2(0, 0), Vec2(1, 1)});
  const std::vector<double> ll{0.0};
  EXPECT_THROW(reweight(b, ll), DomainError);
}

TEST(Resample, UniformWeightsCopyEachOnce) {
  std::vector<TargetState> s;
  for (int i = 0; i < 16; ++i) s.emplace_back(i, -i);
  const auto b = ParticleBelief::uniform(s);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const auto out = resample_low_variance(b, rng);
    for (const auto& x : s) EXPECT_EQ(copies_of(out, x), 1u);
  }
}

TEST(Resample, SingleNonzeroWeightTakesAll) {
  ParticleBelief b({Vec2(1, 1), Vec2(2, 2), Vec2(3, 3), Vec2(4, 4)}, {1.0, 0.0, 0.0, 0.0});
  Rng rng(7);
  const auto out = resample_low_variance(b, rng);
  EXPECT_EQ(copies_of(out, Vec2(1, 1)), 4u);
  for (double w : out.weights) EXPECT_DOUBLE_EQ(w, 0.25);
}

TEST(Resample, ThreeToOneForEveryOffset) {
  // Four particles, two carrying all the weight 0.75 / 0.25.
  ParticleBelief b({Vec2(1, 0), Vec2(2, 0), Vec2(3, 0), Vec2(4, 0)}, {0.75, 0.25, 0.0, 0.0});
  for (int k = 0; k < 1000; ++k) {
    const double u = 0.25 * k / 1000.0;
    const auto out = resample_low_variance_with_offset(b, u);
    EXPECT_EQ(copies_of(out, Vec2(1, 0)), 3u) << "u=" << u;
    EXPECT_EQ(copies_of(out, Vec2(2, 0)), 1u) << "u=" << u;
  }
}

TEST(Resample, ExpectedCopiesEqualNw) {
  ParticleBelief b({Vec2(1, 0), Vec2(2, 0), Vec2(3, 0)}, {0.5, 0.3, 0.2});
  // Enumerate offsets on a fine grid: average copies -> N w.
  std::vector<double> avg(3, 0.0);
  const int grid = 3000;
  for (int k = 0; k < grid; ++k) {
    const auto out = resample_low_variance_with_offset(b, (k + 0.5) / (3.0 * grid));
    for (std::size_t j = 0; j < 3; ++j) avg[j] += static_cast<double>(copies_of(out, b.states[j]));
  }
  EXPECT_NEAR(avg[0] / grid, 1.5, 1e-3);
  EXPECT_NEAR(avg[1] / grid, 0.9, 1e-3);
  EXPECT_NEAR(avg[2] / grid, 0.6, 1e-3);
}

TEST(Resample, SeedDeterminism) {
  ParticleBelief b({Vec2(1, 0), Vec2(2, 0), Vec2(3, 0)}, {0.5, 0.3, 0.2});
  Rng a(11);
  Rng c(11);
  EXPECT_EQ(resample_low_variance(b, a).states, resample_low_variance(b, c).states);
}

TEST(Statistics, EssAndMean) {
  const auto u = ParticleBelief::uniform({Vec2(0, 0), Vec2(2, 0), Vec2(5, 5), Vec2(1, 1)});
  EXPECT_NEAR(ess(u), 4.0, 1e-12);
  ParticleBelief one({Vec2(0, 0), Vec2(2, 0)}, {0.0, 1.0});
  EXPECT_NEAR(ess(one), 1.0, 1e-15);
  const auto two = ParticleBelief::uniform({Vec2(0, 0), Vec2(2, 0)});
  EXPECT_EQ(mean_estimate(two), Vec2(1, 0));
  const Mat2 c = covariance_estimate(two);
  EXPECT_NEAR(c(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(c(1, 1), 0.0, 1e-15);
}

TEST(FilterStep, ResamplesWhenEssDrops) {
  const auto map = open_map();
  std::vector<TargetState> s;
  for (int i = 0; i < 100; ++i) s.emplace_back(2.0 + 0.05 * i, 0.0);
  const auto b = ParticleBelief::uniform(s);
  Rng rng(4);
  FilterStepConfig cfg;
  cfg.predict = false;
  const auto r = filter_step(b, Measurement::detection(3.0, 0.0), {0, 0, 0}, SensorConfig{}, map,
                             Mat2::Identity() * 0.01, MeasurementNoise(kSigma), rng, cfg);
  EXPECT_FALSE(r.degenerate);
  EXPECT_TRUE(r.resampled);
  EXPECT_NEAR(ess(r.belief), 100.0, 1e-9);
  EXPECT_NEAR(mean_estimate(r.belief).x(), 3.0, 0.2);
}

TEST(FilterStep, DegenerateIsRecovered) {
  const auto map = open_map();
  const auto b = ParticleBelief::uniform({Vec2(-4, 0), Vec2(-5, 0), Vec2(-6, 0)});
  Rng rng(4);
  FilterStepConfig cfg;
  cfg.predict = false;
  const auto r = filter_step(b, Measurement::detection(3.0, 0.0), {0, 0, 0}, SensorConfig{}, map,
                             Mat2::Identity() * 0.01, MeasurementNoise(kSigma), rng, cfg);
  EXPECT_TRUE(r.degenerate);
  EXPECT_NEAR(r.belief.total_weight(), 1.0, 1e-12);
}

TEST(GridCluster, MergesSharedCells) {
  ParticleBelief b({Vec2(0.1, 0.1), Vec2(0.3, 0.3), Vec2(5.5, 0.2)}, {0.2, 0.6, 0.2});
  const auto clusters = cluster_by_grid(b, 1.0);
  ASSERT_EQ(clusters.size(), 2u);
  EXPECT_NEAR(clusters[0].weight, 0.8, 1e-15);
  EXPECT_NEAR(clusters[0].mean.x(), 0.25, 1e-15);
  EXPECT_EQ(clusters[0].members, (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(cluster_by_grid(b, 0.0), DomainError);
}
