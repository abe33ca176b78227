#ifndef PMEXPERT_ORACLE_HPP
#define PMEXPERT_ORACLE_HPP

// Brute-force references for small instances: explicit enumeration of class
// paths (fixed learning rate) and of every selection/observation outcome.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pmexpert/class_network.hpp"
#include "pmexpert/environment.hpp"
#include "pmexpert/error.hpp"
#include "pmexpert/feedback.hpp"
#include "pmexpert/learner.hpp"

namespace pmexpert {

struct EnumerationLimit {
  std::size_t max_paths = 1'000'000;
  std::size_t max_outcomes = 1'000'000;
};

/// Expert marginals at round T + 1 from the explicit sum over class paths
///   prior(c_1) * prod_t exp(-eta * phi_t[c_t]) * T(c_{t+1} | c_t),
/// evaluated in the linear domain.
inline std::vector<double> enumerate_weights(const TransitionKernel& kernel,
                                             const std::vector<std::vector<double>>& phi_history, double eta,
                                             EnumerationLimit limit = {}) {
  const std::size_t horizon = phi_history.size();
  const std::size_t experts = kernel.num_experts();
  double paths = 1.0;
  for (std::size_t t = 1; t <= horizon + 1; ++t) paths *= static_cast<double>(kernel.class_set(t).size());
  if (paths > static_cast<double>(limit.max_paths))
    throw Error(ErrorCode::PathExplosion, "enumeration would visit " + std::to_string(paths) + " paths");
  for (const auto& row : phi_history)
    if (row.size() != experts) throw Error(ErrorCode::DimensionMismatch, "phi row has the wrong length");

  std::vector<double> mass(experts, 0.0);
  std::function<void(const ClassId&, std::size_t, double)> walk = [&](const ClassId& c, std::size_t t,
                                                                       double weight) {
    if (t == horizon + 1) {
      mass[c.expert] += weight;
      return;
    }
    const double decayed = weight * std::exp(-eta * phi_history[t - 1][c.expert]);
    for (const auto& tr : kernel.transition(c, t))
      if (tr.weight > 0.0) walk(tr.to, t + 1, decayed * tr.weight);
  };
  for (const auto& tr : kernel.initial_prior())
    if (tr.weight > 0.0) walk(tr.to, 1, tr.weight);

  double total = 0.0;
  for (double x : mass) total += x;
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyClassSet, "all path mass underflowed");
  for (auto& x : mass) x /= total;
  return mass;
}

/// Exact E[regret] against `competitor` by walking every selection and
/// observation pattern with its probability.
inline double exact_expected_regret(const LearnerConfig& cfg, const LossMatrix& losses,
                                    const FeedbackProcess& feedback, const CompetitorSequence& competitor,
                                    std::size_t horizon, EnumerationLimit limit = {}) {
  const std::size_t experts = cfg.num_experts;
  if (losses.rounds() < horizon || losses.experts() != experts)
    throw Error(ErrorCode::DimensionMismatch, "loss matrix does not cover the game");
  if (competitor.size() != horizon) throw Error(ErrorCode::LengthMismatch, "competitor length differs");
  const double per_round = static_cast<double>(experts) * std::pow(2.0, static_cast<double>(experts));
  const double outcomes = std::pow(per_round, static_cast<double>(horizon));
  if (outcomes > static_cast<double>(limit.max_outcomes))
    throw Error(ErrorCode::OutcomeExplosion, "outcome tree has " + std::to_string(outcomes) + " leaves");

  const double competitor_loss = sequence_loss(losses, competitor);
  double expected = 0.0;

  std::function<void(const LearnerState&, double, double)> walk = [&](const LearnerState& state, double prob,
                                                                       double cum) {
    const std::size_t t = state.t;
    if (t > horizon) {
      expected += prob * (cum - competitor_loss);
      return;
    }
    const auto& matrix = feedback.matrix_at(t);
    const auto plan = plan_round(state, cfg, matrix);
    const auto row = losses.row(t - 1);
    for (std::size_t i = 0; i < experts; ++i) {
      if (!(plan.q[i] > 0.0)) continue;
      for (std::uint64_t pattern = 0; pattern < (std::uint64_t{1} << experts); ++pattern) {
        double p_obs = 1.0;
        ObservationOutcome outcome;
        outcome.indicators.assign(experts, 0);
        for (std::size_t m = 0; m < experts; ++m) {
          const bool bit = (pattern >> m) & 1U;
          p_obs *= bit ? matrix(m, i) : 1.0 - matrix(m, i);
          if (bit) {
            outcome.indicators[m] = 1;
            outcome.observed_losses.emplace(m, row[m]);
          }
        }
        if (!(p_obs > 0.0)) continue;
        auto [rec, next] = finish_round(state, cfg, plan, i, std::move(outcome));
        walk(next, prob * plan.q[i] * p_obs, cum + row[i]);
      }
    }
  };
  walk(initial_state(cfg), 1.0, 0.0);
  return expected;
}

}  // namespace pmexpert

#endif  // PMEXPERT_ORACLE_HPP
