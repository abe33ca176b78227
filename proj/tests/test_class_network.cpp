#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "pmexpert/class_network.hpp"
#include "pmexpert/oracle.hpp"
#include "pmexpert/validation.hpp"
#include "test_util.hpp"

using namespace pmexpert;

namespace {

std::vector<double> normalized(const ClassWeights& w) {
  std::vector<double> out;
  double total = 0.0;
  for (const auto& [c, lw] : w.log_weights) total += std::exp(lw);
  for (const auto& [c, lw] : w.log_weights) out.push_back(std::exp(lw) / total);
  return out;
}

ClassWeights weights_of(std::size_t m, std::vector<std::pair<ClassId, double>> entries) {
  ClassWeights w;
  w.num_experts = m;
  w.log_weights = std::move(entries);
  return w;
}

}  // namespace

TEST(Kernel, FixedIsValidAndUniform) {
  const auto k = fixed_kernel(4);
  EXPECT_NO_THROW(validate(*k, 5));
  for (const auto& tr : k->initial_prior()) EXPECT_DOUBLE_EQ(tr.weight, 0.25);
  const auto row = k->transition({2, 0}, 3);
  ASSERT_EQ(row.size(), 1u);
  EXPECT_EQ(row[0].to.expert, 2u);
  EXPECT_EQ(row[0].weight, 1.0);
}

TEST(Kernel, FixedShareRowsSumToOneExactly) {
  for (std::size_t m : {2u, 3u, 5u, 8u}) {
    for (double alpha : {0.0, 0.01, 0.25, 0.5, 1.0}) {
      const auto k = fixed_share_kernel(m, alpha);
      for (const auto& c : k->class_set(1)) {
        double s = 0.0;
        for (const auto& tr : k->transition(c, 1)) s += tr.weight;
        EXPECT_NEAR(s, 1.0, 1e-15);
        EXPECT_DOUBLE_EQ(k->transition_weight(c, c, 1), 1.0 - alpha);
      }
    }
  }
}

TEST(Kernel, FixedShareRejectsBadAlpha) {
  expect_error([] { fixed_share_kernel(3, -0.1); }, ErrorCode::InvalidArgument);
  expect_error([] { fixed_share_kernel(3, 1.5); }, ErrorCode::InvalidArgument);
}

TEST(Kernel, TableValidation) {
  expect_error([] { validate(TableKernel(2, {{0, 0}, {1, 0}}, {0.5, 0.4}, {{1, 0}, {0, 1}})); },
               ErrorCode::InvalidKernel);
  expect_error([] { validate(TableKernel(2, {{0, 0}, {1, 0}}, {0.5, 0.5}, {{1, 0}, {0, 0.9}})); },
               ErrorCode::InvalidKernel);
  expect_error([] { TableKernel(2, {{0, 0}, {2, 0}}, {0.5, 0.5}, {{1, 0}, {0, 1}}); }, ErrorCode::InvalidKernel);
  expect_error([] { TableKernel(2, {{0, 0}, {0, 0}}, {0.5, 0.5}, {{1, 0}, {0, 1}}); }, ErrorCode::InvalidKernel);
  expect_error([] { TableKernel(2, {{0, 0}, {1, 0}}, {1.0}, {{1, 0}, {0, 1}}); }, ErrorCode::DimensionMismatch);
}

TEST(Kernel, TableSortsClasses) {
  const TableKernel k(2, {{1, 0}, {0, 0}}, {0.7, 0.3}, {{0.9, 0.1}, {0.2, 0.8}});
  const auto cs = k.class_set(1);
  EXPECT_EQ(cs[0].expert, 0u);
  EXPECT_DOUBLE_EQ(k.prior_weight({1, 0}), 0.7);
  EXPECT_DOUBLE_EQ(k.transition_weight({1, 0}, {0, 0}, 1), 0.1);
  EXPECT_DOUBLE_EQ(k.transition_weight({0, 0}, {1, 0}, 1), 0.2);
}

TEST(InitWeights, FixedUniform) {
  const auto w = init_weights(*fixed_kernel(4));
  ASSERT_EQ(w.log_weights.size(), 4u);
  for (const auto& [c, lw] : w.log_weights) EXPECT_NEAR(lw, std::log(0.25), 1e-15);
}

TEST(InitWeights, FixedSharePrior) {
  const auto w = init_weights(*fixed_share_kernel(2, 0.1, {0.9, 0.1}));
  EXPECT_NEAR(w.log_weight({0, 0}), std::log(0.9), 1e-15);
  EXPECT_NEAR(w.log_weight({1, 0}), std::log(0.1), 1e-15);
}

TEST(InitWeights, ZeroPriorClassAbsent) {
  const TableKernel k(2, {{0, 0}, {1, 0}, {1, 1}}, {0.5, 0.5, 0.0}, {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto w = init_weights(k);
  EXPECT_EQ(w.log_weights.size(), 2u);
  EXPECT_TRUE(std::isinf(w.log_weight({1, 1})));
}

TEST(Advance, ZeroPhiIdentityKernelKeepsWeights) {
  const auto k = fixed_share_kernel(3, 0.0, {0.2, 0.3, 0.5});
  const auto w0 = init_weights(*k);
  const auto w1 = advance(w0, std::vector<double>{0, 0, 0}, 1.0, 1.0, *k);
  const auto a = normalized(w0), b = normalized(w1);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

TEST(Advance, HandEvaluationTwoExperts) {
  const auto k = fixed_kernel(2);
  const auto w = advance(init_weights(*k), std::vector<double>{std::log(2.0), 0.0}, 1.0, 1.0, *k);
  // Unnormalized weights (1/4, 1/2).
  EXPECT_NEAR(w.log_weight({0, 0}) - w.log_weight({1, 0}), std::log(0.5), 1e-15);
  const auto p = expert_marginals(w);
  EXPECT_NEAR(p[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 3.0, 1e-15);
}

TEST(Advance, FixedShareMixing) {
  const auto k = fixed_share_kernel(2, 0.25);
  const auto w = weights_of(2, {{{0, 0}, std::log(0.3)}, {{1, 0}, std::log(0.7)}});
  const std::vector<double> phi{0.4, 1.1};
  const double eta = 0.8;
  const double z1 = 0.3 * std::exp(-eta * phi[0]);
  const double z2 = 0.7 * std::exp(-eta * phi[1]);
  const auto out = advance(w, phi, eta, eta, *k);
  const double w1 = 0.75 * z1 + 0.25 * z2;
  const double w2 = 0.25 * z1 + 0.75 * z2;
  const auto n = normalized(out);
  EXPECT_NEAR(n[0], w1 / (w1 + w2), 1e-12);
  EXPECT_NEAR(n[1], w2 / (w1 + w2), 1e-12);
}

TEST(Advance, PowerNormalization) {
  // With ratio r the exponentiated class weight is z^r before mixing.
  const auto k = fixed_kernel(2);
  const auto w = weights_of(2, {{{0, 0}, std::log(0.4)}, {{1, 0}, std::log(0.6)}});
  const std::vector<double> phi{1.0, 0.5};
  const auto out = advance(w, phi, 2.0, 1.0, *k);
  const double z1 = std::pow(0.4 * std::exp(-2.0), 0.5);
  const double z2 = std::pow(0.6 * std::exp(-1.0), 0.5);
  const auto p = expert_marginals(out);
  EXPECT_NEAR(p[0], z1 / (z1 + z2), 1e-14);
}

TEST(Advance, MaxLogWeightIsZero) {
  const auto k = fixed_share_kernel(4, 0.1);
  const auto out = advance(init_weights(*k), std::vector<double>{3, 1, 2, 0.5}, 1.3, 1.3, *k);
  double top = -1e300;
  for (const auto& [c, lw] : out.log_weights) top = std::max(top, lw);
  EXPECT_EQ(top, 0.0);
  EXPECT_EQ(out.round, 2u);
}

TEST(Advance, Errors) {
  const auto k = fixed_kernel(2);
  const auto w = init_weights(*k);
  expect_error([&] { advance(w, std::vector<double>{0.0}, 1, 1, *k); }, ErrorCode::DimensionMismatch);
  expect_error([&] { advance(w, std::vector<double>{0, 0}, 1, 2, *k); }, ErrorCode::RateIncrease);
  expect_error([&] { advance(w, std::vector<double>{-1, 0}, 1, 1, *k); }, ErrorCode::NegativePhi);
  expect_error([&] { advance(w, std::vector<double>{0, 0}, 0, 0, *k); }, ErrorCode::InvalidArgument);
}

TEST(Advance, LargeExponentsStayFinite) {
  const auto k = fixed_share_kernel(3, 0.01);
  auto w = init_weights(*k);
  for (int t = 0; t < 50; ++t) w = advance(w, std::vector<double>{1e4, 0.0, 5e3}, 1.0, 1.0, *k);
  const auto p = expert_marginals(w);
  for (double x : p) EXPECT_TRUE(std::isfinite(x));
  EXPECT_GT(p[1], 0.9);
}

TEST(Marginals, EqualWeightsUniform) {
  const auto w = weights_of(5, {{{0, 0}, -2}, {{1, 0}, -2}, {{2, 0}, -2}, {{3, 0}, -2}, {{4, 0}, -2}});
  for (double x : expert_marginals(w)) EXPECT_NEAR(x, 0.2, 1e-15);
}

TEST(Marginals, SumOverClassesOfAnExpert) {
  const auto w = weights_of(2, {{{0, 0}, std::log(0.2)}, {{0, 1}, std::log(0.3)}, {{1, 2}, std::log(0.5)}});
  const auto p = expert_marginals(w);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
}

TEST(Marginals, ExpertWithoutClassGetsZero) {
  const auto w = weights_of(3, {{{0, 0}, 0.0}, {{2, 0}, 0.0}});
  const auto p = expert_marginals(w);
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
}

TEST(Complexity, FixedConstantSequence) {
  const std::vector<std::size_t> seq{2, 2, 2};
  EXPECT_NEAR(complexity(*fixed_kernel(4), CompetitorSequence::from_experts(seq)), 2 * std::log(4.0), 1e-12);
  EXPECT_NEAR(2 * std::log(4.0), 2.7726, 5e-5);
}

TEST(Complexity, FixedShareOneSwitch) {
  const std::vector<std::size_t> seq{0, 0, 1};
  const double w = complexity(*fixed_share_kernel(2, 0.25), CompetitorSequence::from_experts(seq));
  EXPECT_NEAR(w, std::log(2.0) - std::log(0.5 * 0.75 * 0.25), 1e-12);
  EXPECT_NEAR(w, 3.06027, 5e-6);
}

TEST(Complexity, SingletonClassSet) {
  const TableKernel k(3, {{1, 0}}, {1.0}, {{1.0}});
  const std::vector<std::size_t> seq{1, 1, 1, 1};
  EXPECT_EQ(k.max_class_count(4), 1u);
  EXPECT_NEAR(complexity(k, CompetitorSequence::from_experts(seq)), 0.0, 1e-15);
}

TEST(Complexity, OutsideSupport) {
  const std::vector<std::size_t> seq{0, 1};
  expect_error([&] { complexity(*fixed_kernel(2), CompetitorSequence::from_experts(seq)); },
               ErrorCode::ZeroTransition);
}

TEST(ComplexityProperty, KSwitchClosedForm) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + validation_detail::uniform_index(rng, 7);
    const std::size_t horizon = 2 + validation_detail::uniform_index(rng, 499);
    const double alpha = validation_detail::uniform_in(rng, 1e-4, 0.9);
    const auto seq =
        validation_detail::random_switching_sequence(m, horizon, validation_detail::uniform_index(rng, 8), rng);
    std::size_t k = 0;
    for (std::size_t t = 1; t < horizon; ++t) k += seq[t] != seq[t - 1];
    const double dm = static_cast<double>(m);
    const double expected = 2 * std::log(dm) + static_cast<double>(k) * std::log((dm - 1) / alpha) +
                            static_cast<double>(horizon - 1 - k) * std::log(1 / (1 - alpha));
    const double w = complexity(*fixed_share_kernel(m, alpha), CompetitorSequence::from_experts(seq));
    EXPECT_NEAR(w, expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(Complexity, SingleRoundCountsOnlyTheRoot) {
  // With one round the only class set before play is the single root.
  const std::vector<std::size_t> seq{1};
  EXPECT_NEAR(complexity(*fixed_share_kernel(4, 0.1), CompetitorSequence::from_experts(seq)), std::log(4.0), 1e-12);
}

// advance + marginals ignores constant shifts of the incoming log-weights.
TEST(AdvanceProperty, ShiftInvariance) {
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 2 + trial % 4;
    const auto k = trial % 2 ? validation_detail::random_table_kernel(m, rng) : fixed_share_kernel(m, 0.2);
    auto w = init_weights(*k);
    std::vector<double> phi(m);
    for (auto& x : phi) x = validation_detail::uniform_in(rng, 0, 5);
    const double eta = validation_detail::uniform_in(rng, 0.1, 3);
    const double eta2 = eta * rng.uniform();
    auto shifted = w;
    const double c = validation_detail::uniform_in(rng, -500, 500);
    for (auto& e : shifted.log_weights) e.second += c;
    const auto a = expert_marginals(advance(w, phi, eta, eta2, *k));
    const auto b = expert_marginals(advance(shifted, phi, eta, eta2, *k));
    for (std::size_t e = 0; e < m; ++e) EXPECT_NEAR(a[e], b[e], 1e-12);
  }
}

TEST(AdvanceProperty, MarginalsAreDistributions) {
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + trial % 6;
    const auto k = validation_detail::random_table_kernel(m, rng);
    auto w = init_weights(*k);
    double eta = 2.0;
    for (int t = 0; t < 30; ++t) {
      std::vector<double> phi(m);
      for (auto& x : phi) x = validation_detail::uniform_in(rng, 0, 10);
      const double next = eta * validation_detail::uniform_in(rng, 0.8, 1.0);
      w = advance(w, phi, eta, next, *k);
      eta = next;
      const auto p = expert_marginals(w);
      double s = 0;
      for (double x : p) {
        EXPECT_GE(x, 0.0);
        s += x;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(AdvanceProperty, FixedRateMatchesEnumeration) {
  const auto r = weight_equivalence(60, 4242, 1, 6);
  EXPECT_TRUE(r.passed) << r.detail;
  EXPECT_LE(r.worst, 1e-10);
}
