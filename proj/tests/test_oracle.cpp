#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pmexpert/oracle.hpp"
#include "pmexpert/validation.hpp"
#include "test_util.hpp"

using namespace pmexpert;

TEST(Enumerate, NoRoundsGivesPrior) {
  const auto k = fixed_share_kernel(3, 0.2, {0.5, 0.3, 0.2});
  const auto p = enumerate_weights(*k, {}, 1.0);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.3, 1e-15);
  EXPECT_NEAR(p[2], 0.2, 1e-15);
}

TEST(Enumerate, TwoPathHandEvaluation) {
  const auto p = enumerate_weights(*fixed_kernel(2), {{std::log(2.0), 0.0}}, 1.0);
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-15);
}

TEST(Enumerate, FixedShareTwoRoundsByHand) {
  // Paths over {1,2}^3 with alpha = 0.5 mix completely each round.
  const auto k = fixed_share_kernel(2, 0.5);
  const std::vector<std::vector<double>> phi{{1.0, 0.0}, {0.0, 2.0}};
  const auto p = enumerate_weights(*k, phi, 1.0);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
}

TEST(Enumerate, Limits) {
  const std::vector<std::vector<double>> phi(12, std::vector<double>(4, 0.1));
  expect_error([&] { enumerate_weights(*fixed_share_kernel(4, 0.1), phi, 1.0); }, ErrorCode::PathExplosion);
  expect_error([] { enumerate_weights(*fixed_kernel(2), {{0.1}}, 1.0); }, ErrorCode::DimensionMismatch);
}

TEST(EnumerateProperty, MatchesClassRecursion) {
  const auto r = weight_equivalence(120, 8080, 0, 6);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Exact, AllEqualLossesGiveZero) {
  LearnerConfig cfg;
  cfg.num_experts = 3;
  cfg.kernel = fixed_share_kernel(3, 0.1);
  const LossMatrix l(3, 3, 0.6);
  const std::vector<std::size_t> seq{0, 1, 2};
  Rng rng(1);
  const auto f = FeedbackProcess::constant(validation_detail::random_strict_matrix(3, rng));
  EXPECT_EQ(exact_expected_regret(cfg, l, f, CompetitorSequence::from_experts(seq), 3), 0.0);
}

TEST(Exact, OneRoundUniform) {
  LearnerConfig cfg;
  cfg.num_experts = 2;
  cfg.kernel = fixed_kernel(2);
  cfg.epsilon_override = EpsilonSchedule::constant(1.0);
  const LossMatrix l({{0.0, 1.0}});
  const std::vector<std::size_t> seq{0};
  const double e = exact_expected_regret(cfg, l, FeedbackProcess::constant(FeedbackMatrix::bandit(2)),
                                         CompetitorSequence::from_experts(seq), 1);
  EXPECT_NEAR(e, 0.5, 1e-15);
}

TEST(Exact, OneRoundMatchesPolicy) {
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    LearnerConfig cfg;
    cfg.num_experts = 3;
    cfg.kernel = fixed_share_kernel(3, 0.2, validation_detail::random_distribution(3, rng));
    cfg.w_budget = 0.01;  // small budget so epsilon < 1 at round 1
    LossMatrix l(1, 3);
    for (std::size_t e = 0; e < 3; ++e) l(0, e) = rng.uniform();
    const auto f = FeedbackProcess::constant(validation_detail::random_strict_matrix(3, rng));
    const std::vector<std::size_t> seq{1};
    const auto q = policy(initial_state(cfg), cfg);
    double expected = -l(0, 1);
    for (std::size_t e = 0; e < 3; ++e) expected += q[e] * l(0, e);
    EXPECT_NEAR(exact_expected_regret(cfg, l, f, CompetitorSequence::from_experts(seq), 1), expected, 1e-14);
  }
}

TEST(Exact, Limits) {
  LearnerConfig cfg;
  cfg.num_experts = 3;
  cfg.kernel = fixed_kernel(3);
  const LossMatrix l(6, 3, 0.1);
  const std::vector<std::size_t> seq(6, 0);
  expect_error(
      [&] { exact_expected_regret(cfg, l, FeedbackProcess::full(3), CompetitorSequence::from_experts(seq), 6); },
      ErrorCode::OutcomeExplosion);
  const std::vector<std::size_t> short_seq(2, 0);
  expect_error(
      [&] { exact_expected_regret(cfg, l, FeedbackProcess::full(3), CompetitorSequence::from_experts(short_seq), 3); },
      ErrorCode::LengthMismatch);
}

TEST(ExactProperty, AgreesWithMonteCarlo) {
  const auto r = exact_expectation(4, 20000, 1, 31337);
  EXPECT_TRUE(r.passed) << r.detail;
}
