#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pmexpert/evaluation.hpp"
#include "pmexpert/validation.hpp"
#include "test_util.hpp"

using namespace pmexpert;

namespace {

Scenario scenario(std::size_t m, std::size_t horizon) {
  Scenario sc;
  sc.learner.num_experts = m;
  sc.learner.kernel = fixed_share_kernel(m, 0.01);
  sc.learner.w_budget = 8.0;
  sc.losses = LossProcess::piecewise({0.5}, {0, 1}, {});
  sc.feedback = FeedbackProcess::constant(FeedbackMatrix::bandit(m));
  sc.horizon = horizon;
  sc.competitor = CompetitorSpec::best_k_switch(1);
  sc.base_seed = 100;
  return sc;
}

GameTranscript hand_transcript(const std::vector<std::size_t>& selected, const LossMatrix& l) {
  GameTranscript tr;
  for (std::size_t t = 0; t < selected.size(); ++t) {
    RoundRecord r;
    r.t = t + 1;
    r.selected = selected[t];
    r.selected_loss = l(t, selected[t]);
    tr.cumulative_loss += r.selected_loss;
    tr.records.push_back(r);
  }
  return tr;
}

}  // namespace

TEST(Regret, HandTranscript) {
  const LossMatrix l({{1, 0}, {0, 0}, {1, 0}});
  const auto tr = hand_transcript({0, 0, 0}, l);
  const std::vector<std::size_t> comp{1, 1, 1};
  const auto r = realized_regret(tr, CompetitorSequence::from_experts(comp), l, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(r.realized_regret, 2.0);
  EXPECT_DOUBLE_EQ(r.cumulative_loss, 2.0);
  EXPECT_DOUBLE_EQ(r.competitor_loss, 0.0);
  const auto scaled = realized_regret(tr, CompetitorSequence::from_experts(comp), l, {0.0, 4.0});
  EXPECT_DOUBLE_EQ(scaled.normalized_regret, 0.5);
}

TEST(Regret, SelfComparisonIsZero) {
  const auto sc = scenario(3, 400);
  const auto a = run_scenario(sc, 1);
  const auto self = CompetitorSequence::from_experts(a.transcript.selections());
  EXPECT_EQ(realized_regret(a.transcript, self, a.losses, sc.losses.range()).realized_regret, 0.0);
}

TEST(Regret, LengthMismatch) {
  const LossMatrix l({{1, 0}, {0, 0}});
  const auto tr = hand_transcript({0, 0}, l);
  const std::vector<std::size_t> comp{1};
  expect_error([&] { realized_regret(tr, CompetitorSequence::from_experts(comp), l, {}); },
               ErrorCode::LengthMismatch);
}

TEST(Bound, CleanerDominatesTheorem) {
  for (std::size_t m : {2u, 4u, 16u})
    for (double w : {0.5, 3.0, 40.0})
      for (std::size_t horizon : {10u, 1000u, 100000u}) {
        const auto b = theoretical_bound(m, w, std::sqrt(w), EpsilonSchedule::standard(m, w), horizon);
        EXPECT_GE(b.cleaner, b.theorem);
        const auto c = theoretical_bound(m, w, 0.3, EpsilonSchedule::standard(m, w), horizon);
        EXPECT_GE(c.cleaner, c.theorem);
      }
}

TEST(Bound, FullMixing) {
  const std::size_t m = 4, horizon = 50;
  const double w = 30.0, gamma = 2.0;
  const auto b = theoretical_bound(m, w, gamma, EpsilonSchedule::constant(1.0), horizon);
  const double mt = static_cast<double>(m * horizon);
  const double expected = 1 + 4 + 50 + gamma * std::sqrt(mt) + (w + gamma) / gamma * std::sqrt(mt + 16);
  EXPECT_NEAR(b.theorem, expected, 1e-12 * expected);
  // M W >= T forces epsilon = 1 under the standard schedule.
  const auto s = theoretical_bound(m, w, gamma, EpsilonSchedule::standard(m, w), horizon);
  EXPECT_NEAR(s.theorem, expected, 1e-12 * expected);
}

TEST(Bound, RateConstant) {
  for (std::size_t m : {2u, 4u})
    for (double w : {1.0, 10.0}) {
      for (int k = 10; k <= 20; ++k) {
        const std::size_t horizon = std::size_t{1} << k;
        const auto b = theoretical_bound(m, w, std::sqrt(w), EpsilonSchedule::standard(m, w), horizon);
        const double rate = std::cbrt(static_cast<double>(m) * w) * std::pow(static_cast<double>(horizon), 2.0 / 3.0);
        EXPECT_LE(b.theorem / rate, 10.0) << "M=" << m << " W=" << w << " T=2^" << k;
        EXPECT_GT(b.theorem / rate, 0.1);
      }
    }
}

TEST(Lemmas, AllZeroEstimates) {
  // Full feedback with all-equal losses: every phi is zero.
  LearnerConfig cfg;
  cfg.num_experts = 3;
  cfg.kernel = fixed_kernel(3);
  const LossMatrix l(50, 3, 0.4);
  const auto tr = run_game(cfg, l, FeedbackProcess::full(3), 50, 1);
  const std::vector<std::size_t> seq(50, 2);
  const auto d = check_lemmas(tr, CompetitorSequence::from_experts(seq), *cfg.kernel, 1.0);
  EXPECT_TRUE(d.all_passed());
  EXPECT_EQ(d.second_order.final_lhs, 0.0);
  EXPECT_EQ(d.rate_drift.final_lhs, 0.0);
  EXPECT_EQ(d.estimate_regret.final_lhs, 0.0);
}

TEST(Lemmas, IncreasedRateFailsDrift) {
  const auto sc = scenario(3, 300);
  auto a = run_scenario(sc, 7);
  ASSERT_TRUE(a.report.diagnostics->all_passed());
  auto& rec = a.transcript.records[150];
  ASSERT_TRUE(std::isfinite(rec.eta));
  rec.eta *= 2.0;
  const auto d = check_lemmas(a.transcript, a.competitor, *sc.learner.kernel, sc.learner.gamma_value());
  EXPECT_FALSE(d.rate_drift.passed);
  EXPECT_NE(d.rate_drift.detail.find("151"), std::string::npos) << d.rate_drift.detail;
}

TEST(Lemmas, OutOfSupportCompetitor) {
  const auto sc = scenario(2, 20);
  const auto a = run_scenario(sc, 1);
  std::vector<std::size_t> seq(20, 0);
  seq[10] = 1;
  expect_error([&] { check_lemmas(a.transcript, CompetitorSequence::from_experts(seq), *fixed_kernel(2), 1.0); },
               ErrorCode::ZeroTransition);
}

TEST(LemmaProperty, RandomizedRuns) {
  const auto r = lemma_suite(24, 800, 555);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Evaluate, Warnings) {
  auto sc = scenario(2, 100);
  sc.learner.kernel = fixed_kernel(2);
  sc.competitor = CompetitorSpec::sequence(std::vector<std::size_t>(100, 0));
  sc.learner.w_budget = 0.5;
  auto a = run_scenario(sc, 1);
  ASSERT_EQ(a.report.warnings.size(), 1u);
  EXPECT_NE(a.report.warnings[0].find("exceeds the W budget"), std::string::npos);
  EXPECT_TRUE(std::isfinite(a.report.bound_value));

  std::vector<std::size_t> seq(100, 0);
  seq[50] = 1;
  const auto rep = evaluate_run(a.transcript, CompetitorSequence::from_experts(seq), a.losses, sc.losses.range());
  ASSERT_EQ(rep.warnings.size(), 1u);
  EXPECT_NE(rep.warnings[0].find("outside the kernel support"), std::string::npos);
  EXPECT_FALSE(rep.diagnostics.has_value());
  EXPECT_TRUE(std::isnan(rep.bound_value));
}

TEST(Evaluate, BoundUsesRealizedComplexity) {
  const auto sc = scenario(2, 500);
  const auto a = run_scenario(sc, 3);
  const auto b = theoretical_bound(2, a.report.complexity, sc.learner.gamma_value(), sc.learner.schedule(), 500);
  EXPECT_DOUBLE_EQ(a.report.bound_value, b.theorem);
  EXPECT_DOUBLE_EQ(a.report.complexity, complexity(*sc.learner.kernel, a.competitor));
}

TEST(CompetitorSpecs, Resolve) {
  const LossMatrix l({{0.9, 0.1}, {0.9, 0.1}, {0.1, 0.9}});
  const auto k = fixed_share_kernel(2, 0.1);
  EXPECT_EQ(CompetitorSpec::fixed(0).resolve(l, *k, 3).experts(), (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_EQ(CompetitorSpec::best_fixed().resolve(l, *k, 3).experts(), (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_EQ(CompetitorSpec::best_k_switch(1).resolve(l, *k, 3).experts(), (std::vector<std::size_t>{1, 1, 0}));
  EXPECT_EQ(CompetitorSpec::sequence({0, 1, 0, 1}).resolve(l, *k, 3).experts(),
            (std::vector<std::size_t>{0, 1, 0}));
  expect_error([&] { CompetitorSpec::sequence({0, 1}).resolve(l, *k, 3); }, ErrorCode::LengthMismatch);
  expect_error([&] { CompetitorSpec::fixed(2).resolve(l, *k, 3); }, ErrorCode::InvalidArgument);
}

TEST(MonteCarlo, SingleSeed) {
  const auto sc = scenario(2, 200);
  const auto s = monte_carlo(sc, 1);
  const auto a = run_scenario(sc, sc.base_seed);
  EXPECT_EQ(s.mean_regret, a.report.realized_regret);
  EXPECT_EQ(s.std_error, 0.0);
  EXPECT_FALSE(s.std_error_defined);
  expect_error([&] { monte_carlo(sc, 0); }, ErrorCode::InvalidArgument);
}

TEST(MonteCarlo, EqualLosses) {
  auto sc = scenario(3, 100);
  sc.losses = LossProcess::scripted(LossMatrix(100, 3, 0.25), {});
  const auto s = monte_carlo(sc, 20);
  EXPECT_EQ(s.mean_regret, 0.0);
  EXPECT_EQ(s.ci_high - s.ci_low, 0.0);
  EXPECT_TRUE(s.std_error_defined);
}

TEST(MonteCarlo, ThreadCountDoesNotMatter) {
  const auto sc = scenario(3, 300);
  const auto a = monte_carlo(sc, 12, 1);
  const auto b = monte_carlo(sc, 12, 4);
  EXPECT_EQ(a.mean_regret, b.mean_regret);
  EXPECT_EQ(a.std_error, b.std_error);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].seed, sc.base_seed + i);
    EXPECT_EQ(a.runs[i].regret, b.runs[i].regret);
  }
}

TEST(MonteCarlo, SummaryStatistics) {
  const auto sc = scenario(2, 150);
  const auto s = monte_carlo(sc, 10);
  std::vector<double> r;
  for (const auto& run : s.runs) r.push_back(run.regret);
  double mean = 0;
  for (double x : r) mean += x;
  mean /= 10;
  double ss = 0;
  for (double x : r) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(s.mean_regret, mean, 1e-12);
  EXPECT_NEAR(s.std_error, std::sqrt(ss / 9 / 10), 1e-12);
  EXPECT_NEAR(s.ci_high - s.ci_low, 2 * 1.959963984540054 * s.std_error, 1e-12);
  EXPECT_EQ(s.lemma_failures, 0u);
}

TEST(Scaling, ExactPowerLaws) {
  std::vector<ScalingPoint> a, b;
  for (int k = 10; k <= 16; ++k) {
    const double t = std::pow(2.0, k);
    a.push_back({t, 3.7 * std::pow(t, 2.0 / 3.0)});
    b.push_back({t, 0.2 * t});
  }
  EXPECT_NEAR(fit_scaling(a), 2.0 / 3.0, 1e-9);
  EXPECT_NEAR(fit_scaling(b), 1.0, 1e-9);
}

TEST(Scaling, Degenerate) {
  std::vector<ScalingPoint> few{{10, 1}, {20, 2}, {40, 3}};
  expect_error([&] { fit_scaling(few); }, ErrorCode::DegenerateFit);
  std::vector<ScalingPoint> bad{{10, 1}, {20, 2}, {40, 0}, {80, 3}};
  expect_error([&] { fit_scaling(bad); }, ErrorCode::DegenerateFit);
  std::vector<ScalingPoint> same{{10, 1}, {10, 2}, {10, 3}, {10, 4}};
  expect_error([&] { fit_scaling(same); }, ErrorCode::DegenerateFit);
}
