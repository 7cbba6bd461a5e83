#include "rmdp/bellman.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

namespace rmdp {
namespace {

const RegularizerSpec kShannon5 = RegularizerSpec::shannon(5.0);

TEST(BellmanTest, ScalarResidualAndJacobian) {
  const MdpInstance mdp = oracle::scalar_instance();
  const RegularizerSpec reg = RegularizerSpec::shannon(1.0);
  const Vector f = residual_F(Vector{0.0}, mdp, reg);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_DOUBLE_EQ(f[0], 1.0);
  const DenseMatrix jac = jacobian(Vector{0.0}, mdp, reg);
  EXPECT_NEAR(jac(0, 0), -0.2, 1e-15);
  EXPECT_NEAR(residual_F(Vector{5.0}, mdp, reg)[0], 0.0, 1e-15);
}

TEST(BellmanTest, ResidualMatchesScalarLoops) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const MdpInstance mdp = random_instance(2, 2, 0.8, seed);
    SplitMix64 rng(seed + 100);
    const Vector q = oracle::uniform_vector(rng, 4, -3.0, 3.0);
    const Vector expected = oracle::shannon_residual_loops(q, mdp, 5.0);
    const Vector actual = residual_F(q, mdp, kShannon5);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(actual[i], expected[i], 1e-12);
  }
}

TEST(BellmanTest, JacobianMatchesFiniteDifferencesOfLoopOracle) {
  const MdpInstance mdp = random_instance(3, 2, 0.9, 4);
  SplitMix64 rng(4);
  const Vector q = oracle::uniform_vector(rng, 6, -2.0, 2.0);
  const DenseMatrix jac = jacobian(q, mdp, kShannon5);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto fi = [&](const std::vector<double>& x) {
      return oracle::shannon_residual_loops(x, mdp, 5.0)[i];
    };
    const std::vector<double> row = oracle::fd_gradient(fi, q);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(jac(i, j), row[j], 1e-7);
  }
}

TEST(BellmanTest, DecompositionIdentity) {
  for (auto reg : {kShannon5, RegularizerSpec::tsallis(2.0)}) {
    const MdpInstance mdp = random_instance(4, 3, 0.8, 9);
    SplitMix64 rng(9);
    const Vector q = oracle::uniform_vector(rng, 12, -5.0, 5.0);
    const BellmanParts parts = decomposition_parts(q, mdp, reg);
    const Vector lhs = residual_F(q, mdp, reg);
    const Vector jq = matvec(jacobian(q, mdp, reg), q);
    const Vector pe = matvec(mdp.transition, parts.e_omega);
    for (std::size_t i = 0; i < 12; ++i) {
      EXPECT_NEAR(lhs[i], jq[i] + mdp.gamma * pe[i] + mdp.reward[i], 1e-12);
    }
  }
}

TEST(BellmanTest, EOmegaUniformAndVertex) {
  const MdpInstance mdp = random_instance(1, 3, 0.8, 2);
  // Constant values give the uniform distribution: e = ln(3) / N.
  const BellmanParts flat = decomposition_parts(Vector(3, 1.0), mdp, kShannon5);
  EXPECT_NEAR(flat.e_omega[0], std::log(3.0) / 5.0, 1e-15);
  // A Tsallis vertex has Omega = 0.
  const BellmanParts vertex =
      decomposition_parts(Vector{10.0, 0.0, 0.0}, mdp, RegularizerSpec::tsallis(1.0));
  EXPECT_EQ(vertex.e_omega[0], 0.0);
}

TEST(BellmanTest, ApplyBellmanIsContraction) {
  const MdpInstance mdp = random_instance(5, 5, 0.8, 1);
  SplitMix64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Vector a = oracle::uniform_vector(rng, 25, -5.0, 5.0);
    const Vector b = oracle::uniform_vector(rng, 25, -5.0, 5.0);
    const double lhs = inf_norm(subtract(apply_bellman(a, mdp, kShannon5),
                                         apply_bellman(b, mdp, kShannon5)));
    EXPECT_LE(lhs, 0.8 * inf_norm(subtract(a, b)) + 1e-12);
  }
}

TEST(BellmanTest, BellmanEqualsSelfConsistencyOfGreedyPolicy) {
  for (auto reg : {kShannon5, RegularizerSpec::tsallis(5.0)}) {
    const MdpInstance mdp = random_instance(4, 4, 0.8, 3);
    SplitMix64 rng(3);
    const Vector q = oracle::uniform_vector(rng, 16, -5.0, 5.0);
    const Vector lhs = apply_bellman(q, mdp, reg);
    const Vector rhs = apply_self_consistency(q, greedy_policy(q, mdp, reg), mdp, reg);
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
  }
}

TEST(BellmanTest, TinyDiscountGivesReward) {
  const MdpInstance mdp = random_instance(3, 2, 1e-9, 8);
  const Vector out = apply_bellman(Vector(6, 1.0), mdp, kShannon5);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(out[i], mdp.reward[i], 1e-8);
}

TEST(BellmanTest, KernelRowsSumToGamma) {
  const MdpInstance mdp = random_instance(5, 3, 0.7, 6);
  SplitMix64 rng(6);
  const DenseMatrix k =
      discounted_policy_kernel(oracle::uniform_vector(rng, 15, -1.0, 1.0), mdp, kShannon5);
  for (std::size_t i = 0; i < 15; ++i) {
    double sum = 0.0;
    for (double v : k.row(i)) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 0.7, 1e-14);
  }
}

TEST(BellmanTest, GreedyPolicyMatchesGridArgmax) {
  const MdpInstance mdp = random_instance(2, 2, 0.8, 5);
  const RegularizerSpec reg = RegularizerSpec::shannon(2.0);
  const Vector q{0.3, -0.4, 1.1, 1.0};
  const PolicyMatrix pi = greedy_policy(q, mdp, reg);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto grid =
        oracle::grid_smoothed_max(q[2 * s], q[2 * s + 1], reg.kind, reg.smoothing_strength);
    EXPECT_NEAR(pi(s, 0), grid.p0, 1e-4);
  }
}

TEST(BellmanTest, WrongSizesThrow) {
  const MdpInstance mdp = random_instance(2, 2, 0.8, 5);
  EXPECT_THROW(residual_F(Vector(3), mdp, kShannon5), std::invalid_argument);
  EXPECT_THROW(jacobian(Vector(5), mdp, kShannon5), std::invalid_argument);
  EXPECT_THROW(apply_self_consistency(Vector(4), PolicyMatrix(3, 2), mdp, kShannon5),
               std::invalid_argument);
}

}  // namespace
}  // namespace rmdp
