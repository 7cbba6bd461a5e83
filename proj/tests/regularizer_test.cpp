#include "rmdp/regularizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "oracles.hpp"

namespace rmdp {
namespace {

const RegularizerSpec kShannon1 = RegularizerSpec::shannon(1.0);
const RegularizerSpec kTsallis1 = RegularizerSpec::tsallis(1.0);

TEST(SmoothedMaxTest, ShannonConstantVector) {
  for (std::size_t m : {1u, 2u, 5u, 9u}) {
    const std::vector<double> x(m, 0.7);
    EXPECT_NEAR(smoothed_max(x, kShannon1), 0.7 + std::log(double(m)), 1e-14);
  }
}

TEST(SmoothedMaxTest, ShannonTwoPointMatchesGridSearch) {
  const auto grid = oracle::grid_smoothed_max(1.0, 0.0, RegularizerKind::Shannon, 1.0);
  const double value = smoothed_max(std::vector<double>{1.0, 0.0}, kShannon1);
  EXPECT_NEAR(value, grid.value, 1e-6);
  EXPECT_NEAR(value, std::log(std::numbers::e + 1.0), 1e-14);
  EXPECT_NEAR(value, 1.31326, 1e-5);
}

TEST(SmoothedMaxTest, TsallisInteriorOptimum) {
  const auto grid = oracle::grid_smoothed_max(0.6, 0.4, RegularizerKind::Tsallis, 1.0);
  const double value = smoothed_max(std::vector<double>{0.6, 0.4}, kTsallis1);
  EXPECT_NEAR(value, grid.value, 1e-8);
  EXPECT_NEAR(grid.p0, 0.6, 1e-4);
  EXPECT_NEAR(value, 0.76, 1e-14);
}

TEST(SmoothedMaxTest, NoOverflowAtLargeValues) {
  const RegularizerSpec reg = RegularizerSpec::shannon(5.0);
  const std::vector<double> x{400.0, 399.0, -50.0};
  const double value = smoothed_max(x, reg);
  EXPECT_TRUE(std::isfinite(value));
  EXPECT_GE(value, 400.0);
  EXPECT_LE(value, 400.0 + std::log(3.0) / 5.0);
  const ProbabilityVector g = smoothed_max_gradient(x, reg);
  EXPECT_TRUE(std::isfinite(g[0]));
  EXPECT_NEAR(g[0] + g[1] + g[2], 1.0, 1e-15);
}

TEST(SmoothedMaxTest, NonFiniteInputIsDomainError) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(smoothed_max(std::vector<double>{1.0, nan}, kShannon1),
               std::domain_error);
  EXPECT_THROW(smoothed_max(std::vector<double>{inf}, kTsallis1),
               std::domain_error);
  EXPECT_THROW(smoothed_max_gradient(std::vector<double>{nan}, kShannon1),
               std::domain_error);
  EXPECT_THROW(smoothed_max(std::vector<double>{}, kShannon1), std::domain_error);
}

TEST(SmoothedMaxGradientTest, ShannonUniformOnConstantVector) {
  const ProbabilityVector g =
      smoothed_max_gradient(std::vector<double>(4, -1.25), kShannon1);
  for (double p : g) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(SmoothedMaxGradientTest, ShannonMatchesFiniteDifference) {
  const auto f = [](const std::vector<double>& x) { return smoothed_max(x, kShannon1); };
  const std::vector<double> fd = oracle::fd_gradient(f, {1.0, 0.0});
  const ProbabilityVector g = smoothed_max_gradient(std::vector<double>{1.0, 0.0}, kShannon1);
  EXPECT_NEAR(g[0], fd[0], 1e-8);
  EXPECT_NEAR(g[1], fd[1], 1e-8);
  const double e = std::numbers::e;
  EXPECT_NEAR(g[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(g[0], 0.73106, 1e-5);
  EXPECT_NEAR(g[1], 0.26894, 1e-5);
}

TEST(SmoothedMaxGradientTest, TsallisVertex) {
  const ProbabilityVector g = smoothed_max_gradient(std::vector<double>{1.0, 0.0}, kTsallis1);
  EXPECT_EQ(g[0], 1.0);
  EXPECT_EQ(g[1], 0.0);
  const auto grid = oracle::grid_smoothed_max(1.0, 0.0, RegularizerKind::Tsallis, 1.0);
  EXPECT_NEAR(grid.p0, 1.0, 1e-4);
}

TEST(SmoothedMaxGradientTest, SparsemaxMatchesGridArgmax) {
  SplitMix64 rng(11);
  for (int i = 0; i < 50; ++i) {
    const double x0 = 4.0 * rng.uniform() - 2.0;
    const double x1 = 4.0 * rng.uniform() - 2.0;
    const RegularizerSpec reg = RegularizerSpec::tsallis(0.5 + 2.0 * rng.uniform());
    const ProbabilityVector g = smoothed_max_gradient(std::vector<double>{x0, x1}, reg);
    const auto grid = oracle::grid_smoothed_max(x0, x1, reg.kind, reg.smoothing_strength);
    EXPECT_NEAR(g[0], grid.p0, 2e-4);
  }
}

TEST(SmoothedMaxGradientTest, SparsemaxSupport) {
  // Scaled entries 3.0, 2.5, 0.0: threshold (3 + 2.5 - 1)/2 = 2.25.
  const ProbabilityVector g =
      smoothed_max_gradient(std::vector<double>{0.6, 0.5, 0.0}, RegularizerSpec::tsallis(5.0));
  EXPECT_NEAR(g[0], 0.75, 1e-15);
  EXPECT_NEAR(g[1], 0.25, 1e-15);
  EXPECT_EQ(g[2], 0.0);
}

TEST(RegularizerValueTest, ClosedForms) {
  EXPECT_NEAR(regularizer_value(std::vector<double>(5, 0.2), kShannon1),
              -std::log(5.0), 1e-15);
  EXPECT_NEAR(-std::log(5.0), -1.60944, 1e-5);
  EXPECT_EQ(regularizer_value(std::vector<double>{1.0, 0.0, 0.0}, kShannon1), 0.0);
  EXPECT_DOUBLE_EQ(regularizer_value(std::vector<double>{0.5, 0.5}, kTsallis1), -0.25);
}

TEST(RegularizerValueTest, OffSimplexIsDomainError) {
  EXPECT_THROW(regularizer_value(std::vector<double>{0.5, 0.6}, kShannon1),
               std::domain_error);
  EXPECT_THROW(regularizer_value(std::vector<double>{1.1, -0.1}, kTsallis1),
               std::domain_error);
  // Within the 1e-9 tolerance.
  EXPECT_NO_THROW(regularizer_value(std::vector<double>{0.5, 0.5 + 1e-10}, kShannon1));
}

TEST(RegularizerSpecTest, RejectsNonPositiveStrength) {
  EXPECT_THROW(RegularizerSpec::shannon(0.0), std::invalid_argument);
  EXPECT_THROW(RegularizerSpec::tsallis(-1.0), std::invalid_argument);
  EXPECT_EQ(RegularizerSpec::tsallis(3.0).strong_convexity, 1.0);
}

// Sampled invariants, both regularizers, several strengths.
class SmoothedMaxProperty
    : public ::testing::TestWithParam<std::tuple<RegularizerKind, double>> {
 protected:
  RegularizerSpec reg() const {
    return RegularizerSpec::make(std::get<0>(GetParam()), std::get<1>(GetParam()));
  }
};

TEST_P(SmoothedMaxProperty, EnvelopeIdentity) {
  SplitMix64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto x = oracle::uniform_vector(rng, 1 + i % 6, -5.0, 5.0);
    const ProbabilityVector g = smoothed_max_gradient(x, reg());
    double inner = 0.0;
    for (std::size_t a = 0; a < x.size(); ++a) inner += g[a] * x[a];
    const double rebuilt =
        inner - oracle::omega(reg().kind, {g.begin(), g.end()}) / reg().smoothing_strength;
    EXPECT_NEAR(smoothed_max(x, reg()), rebuilt, 1e-10);
  }
}

TEST_P(SmoothedMaxProperty, GradientIsDistribution) {
  SplitMix64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto x = oracle::uniform_vector(rng, 1 + i % 7, -20.0, 20.0);
    const ProbabilityVector g = smoothed_max_gradient(x, reg());
    double sum = 0.0;
    for (double p : g) {
      EXPECT_GE(p, 0.0);
      sum += p;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST_P(SmoothedMaxProperty, GradientMatchesFiniteDifferences) {
  SplitMix64 rng(3);
  const auto f = [this](const std::vector<double>& x) { return smoothed_max(x, reg()); };
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    const auto x = oracle::uniform_vector(rng, 2 + i % 4, -2.0, 2.0);
    const ProbabilityVector g = smoothed_max_gradient(x, reg());
    if (reg().kind == RegularizerKind::Tsallis) {
      // Skip points whose support could flip under a 1e-6 perturbation.
      bool near_kink = false;
      std::vector<double> probe = x;
      for (std::size_t a = 0; a < x.size() && !near_kink; ++a) {
        for (double h : {1e-6, -1e-6}) {
          probe[a] = x[a] + h;
          const ProbabilityVector gp = smoothed_max_gradient(probe, reg());
          for (std::size_t b = 0; b < x.size(); ++b) {
            near_kink = near_kink || ((gp[b] > 0.0) != (g[b] > 0.0));
          }
        }
        probe[a] = x[a];
      }
      if (near_kink) continue;
    }
    const auto fd = oracle::fd_gradient(f, x);
    for (std::size_t a = 0; a < x.size(); ++a) EXPECT_NEAR(fd[a], g[a], 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 150);
}

TEST_P(SmoothedMaxProperty, GradientLipschitz) {
  SplitMix64 rng(4);
  const double n = reg().smoothing_strength;
  for (int i = 0; i < 500; ++i) {
    const std::size_t m = 2 + i % 5;
    const auto x = oracle::uniform_vector(rng, m, -3.0, 3.0);
    const double spread = i % 2 ? 3.0 : 0.05;
    std::vector<double> y = x;
    for (double& v : y) v += spread * (2.0 * rng.uniform() - 1.0);
    const ProbabilityVector gx = smoothed_max_gradient(x, reg());
    const ProbabilityVector gy = smoothed_max_gradient(y, reg());
    EXPECT_LE(two_norm_vec(subtract(gx.entries(), gy.entries())),
              n * two_norm_vec(subtract(x, y)) + 1e-10);
  }
}

TEST_P(SmoothedMaxProperty, UniformApproximationSandwich) {
  SplitMix64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const std::size_t m = 1 + i % 6;
    const auto x = oracle::uniform_vector(rng, m, -10.0, 10.0);
    const double top = *std::max_element(x.begin(), x.end());
    const double value = smoothed_max(x, reg());
    EXPECT_GE(value, top - 1e-12);
    EXPECT_LE(value, top + reg().max_negative_value(m) / reg().smoothing_strength + 1e-12);
  }
}

TEST_P(SmoothedMaxProperty, Convexity) {
  SplitMix64 rng(6);
  for (int i = 0; i < 300; ++i) {
    const std::size_t m = 2 + i % 4;
    const auto x = oracle::uniform_vector(rng, m, -4.0, 4.0);
    const auto y = oracle::uniform_vector(rng, m, -4.0, 4.0);
    const double lambda = rng.uniform();
    std::vector<double> mix(m);
    for (std::size_t a = 0; a < m; ++a) mix[a] = lambda * x[a] + (1 - lambda) * y[a];
    EXPECT_LE(smoothed_max(mix, reg()),
              lambda * smoothed_max(x, reg()) + (1 - lambda) * smoothed_max(y, reg()) + 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Regularizers, SmoothedMaxProperty,
    ::testing::Combine(::testing::Values(RegularizerKind::Shannon, RegularizerKind::Tsallis),
                       ::testing::Values(0.5, 1.0, 5.0)));

}  // namespace
}  // namespace rmdp
