#ifndef PMEXPERT_LEARNER_HPP
#define PMEXPERT_LEARNER_HPP

// Expert mixture under partial monitoring.
//
// Each round mixes the class-network marginals p with the uniform
// distribution, samples a selection, draws the observations, and feeds the
// importance-weighted, translation-corrected estimates
//     phi_m = (l_m - psi) / o_m   (observed m),   0 otherwise
// back into the class weights with the second-order adaptive rate
//     eta_t = gamma / sqrt(V_t + D_t^2).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmexpert/class_network.hpp"
#include "pmexpert/error.hpp"
#include "pmexpert/feedback.hpp"
#include "pmexpert/random.hpp"

namespace pmexpert {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// min(1, M^(1/3) W^(1/3) t^(-1/3)).
inline double epsilon_schedule(std::size_t num_experts, double w_budget, std::size_t t) {
  if (t == 0) throw Error(ErrorCode::InvalidArgument, "rounds start at 1");
  const double e = std::cbrt(static_cast<double>(num_experts)) * std::cbrt(w_budget) /
                   std::cbrt(static_cast<double>(t));
  return std::min(1.0, e);
}

/// Uniform-mixing coefficients per round.
class EpsilonSchedule {
 public:
  enum class Kind { standard, constant, explicit_values };

  static EpsilonSchedule standard(std::size_t num_experts, double w_budget) {
    EpsilonSchedule s;
    s.kind_ = Kind::standard;
    s.num_experts_ = num_experts;
    s.w_budget_ = w_budget;
    return s;
  }

  static EpsilonSchedule constant(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [0, 1]");
    EpsilonSchedule s;
    s.kind_ = Kind::constant;
    s.values_ = {epsilon};
    return s;
  }

  /// values[t - 1] is used at round t; the last value repeats.
  static EpsilonSchedule explicit_values(std::vector<double> values) {
    if (values.empty()) throw Error(ErrorCode::InvalidArgument, "empty epsilon schedule");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0 && values[i] <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "epsilon must lie in [0, 1]");
      if (i > 0 && values[i] > values[i - 1])
        throw Error(ErrorCode::InvalidArgument, "epsilon schedule must be nonincreasing");
    }
    EpsilonSchedule s;
    s.kind_ = Kind::explicit_values;
    s.values_ = std::move(values);
    return s;
  }

  Kind kind() const { return kind_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t t) const {
    switch (kind_) {
      case Kind::standard:
        return epsilon_schedule(num_experts_, w_budget_, t);
      case Kind::constant:
        return values_.front();
      case Kind::explicit_values:
        return values_[std::min(t, values_.size()) - 1];
    }
    return 1.0;
  }

 private:
  Kind kind_ = Kind::standard;
  std::size_t num_experts_ = 1;
  double w_budget_ = 1.0;
  std::vector<double> values_;
};

struct LearnerConfig {
  std::size_t num_experts = 1;
  double w_budget = 1.0;
  std::optional<double> gamma;  // defaults to sqrt(w_budget)
  std::optional<EpsilonSchedule> epsilon_override;
  std::optional<double> fixed_eta;
  KernelPtr kernel;

  double gamma_value() const { return gamma.value_or(std::sqrt(w_budget)); }

  EpsilonSchedule schedule() const {
    return epsilon_override.value_or(EpsilonSchedule::standard(num_experts, w_budget));
  }
};

inline void validate(const LearnerConfig& cfg) {
  if (cfg.num_experts == 0) throw Error(ErrorCode::InvalidArgument, "need at least one expert");
  if (!(cfg.w_budget > 0.0)) throw Error(ErrorCode::InvalidArgument, "W budget must be positive");
  if (!(cfg.gamma_value() > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be positive");
  if (cfg.fixed_eta && !(*cfg.fixed_eta > 0.0 && std::isfinite(*cfg.fixed_eta)))
    throw Error(ErrorCode::InvalidArgument, "fixed eta must be positive");
  if (!cfg.kernel) throw Error(ErrorCode::InvalidArgument, "learner has no transition kernel");
  if (cfg.kernel->num_experts() != cfg.num_experts)
    throw Error(ErrorCode::DimensionMismatch, "kernel expert count differs from learner");
  validate(*cfg.kernel);
}

/// Per-round algorithm state. An eta of +infinity means "not yet set", which
/// happens while every estimate so far is zero.
struct LearnerState {
  std::size_t t = 1;
  double psi = kInfinity;
  double V = 0.0;
  double D = 0.0;
  double eta_prev = kInfinity;
  ClassWeights weights;
  std::vector<double> last_p;
  std::vector<double> last_q;
};

inline LearnerState initial_state(const LearnerConfig& cfg) {
  validate(cfg);
  LearnerState s;
  s.weights = init_weights(*cfg.kernel);
  return s;
}

struct RoundRecord {
  std::size_t t = 0;
  std::vector<double> p;
  std::vector<double> q;
  std::size_t selected = 0;
  ObservationOutcome outcome;
  std::vector<double> obs_prob;
  std::vector<double> phi;
  double v = 0.0;
  double d = 0.0;
  double V = 0.0;
  double D = 0.0;
  double eta = kInfinity;
  double epsilon = 1.0;
  double psi = kInfinity;
  /// Filled in by the environment; the learner never reads it.
  double selected_loss = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<double> mix_uniform(std::span<const double> p, double epsilon) {
  const double share = epsilon / static_cast<double>(p.size());
  std::vector<double> q(p.size());
  for (std::size_t m = 0; m < p.size(); ++m) q[m] = (1.0 - epsilon) * p[m] + share;
  return q;
}

/// Selection distribution for the current round.
inline std::vector<double> policy(const LearnerState& state, const LearnerConfig& cfg) {
  const auto p = expert_marginals(state.weights);
  return mix_uniform(p, cfg.schedule().at(state.t));
}

/// Inverse-CDF draw, consuming exactly one uniform.
inline std::size_t select(std::span<const double> q, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t m = 0; m < q.size(); ++m) {
    if (q[m] > 0.0) last_positive = m;
    cum += q[m];
    if (u < cum && q[m] > 0.0) return m;
  }
  return last_positive;
}

inline std::vector<double> estimate(const ObservationOutcome& outcome, std::span<const double> obs_prob,
                                    double psi_new) {
  std::vector<double> phi(obs_prob.size(), 0.0);
  for (const auto& [m, loss] : outcome.observed_losses) {
    if (!(obs_prob[m] > 0.0))
      throw Error(ErrorCode::ZeroObservationProbability,
                  "expert " + std::to_string(m) + " was observed with zero observation probability");
    phi[m] = (loss - psi_new) / obs_prob[m];
  }
  return phi;
}

struct RateUpdate {
  double eta = kInfinity;
  double v = 0.0;
  double d = 0.0;
  double V = 0.0;
  double D = 0.0;
};

inline RateUpdate update_rate(const LearnerState& state, std::span<const double> phi,
                              std::span<const double> p, const LearnerConfig& cfg) {
  RateUpdate r;
  const auto [lo, hi] = std::minmax_element(phi.begin(), phi.end());
  r.d = *hi - *lo;
  for (std::size_t m = 0; m < phi.size(); ++m) r.v += p[m] * phi[m] * phi[m];
  r.V = state.V + r.v;
  r.D = std::max(state.D, r.d);
  if (cfg.fixed_eta) {
    r.eta = *cfg.fixed_eta;
  } else {
    const double denom = r.V + r.D * r.D;
    r.eta = denom > 0.0 ? cfg.gamma_value() / std::sqrt(denom) : kInfinity;
  }
  return r;
}

/// Everything fixed before the selection is drawn.
struct RoundPlan {
  double epsilon = 1.0;
  std::vector<double> p;
  std::vector<double> q;
  std::vector<double> obs_prob;
};

inline RoundPlan plan_round(const LearnerState& state, const LearnerConfig& cfg,
                            const FeedbackMatrix& matrix) {
  if (matrix.size() != cfg.num_experts)
    throw Error(ErrorCode::DimensionMismatch, "feedback matrix does not match the expert count");
  RoundPlan plan;
  plan.epsilon = cfg.schedule().at(state.t);
  plan.p = expert_marginals(state.weights);
  plan.q = mix_uniform(plan.p, plan.epsilon);
  plan.obs_prob = observation_probabilities(matrix, plan.q);
  if (matrix.mode() == FeedbackMode::strict) {
    const double floor = plan.epsilon / static_cast<double>(cfg.num_experts);
    for (std::size_t m = 0; m < plan.obs_prob.size(); ++m)
      if (plan.obs_prob[m] < floor * (1.0 - 1e-12))
        throw Error(ErrorCode::InvariantViolation,
                    "observation probability of expert " + std::to_string(m) + " fell below epsilon/M");
  }
  return plan;
}

/// Applies a realized selection and outcome to the state.
inline std::pair<RoundRecord, LearnerState> finish_round(const LearnerState& state, const LearnerConfig& cfg,
                                                         RoundPlan plan, std::size_t selected,
                                                         ObservationOutcome outcome) {
  double psi = state.psi;
  for (const auto& [m, loss] : outcome.observed_losses) psi = std::min(psi, loss);

  auto phi = estimate(outcome, plan.obs_prob, psi);
  const auto rate = update_rate(state, phi, plan.p, cfg);

  LearnerState next;
  next.t = state.t + 1;
  next.psi = psi;
  next.V = rate.V;
  next.D = rate.D;
  next.eta_prev = rate.eta;
  if (cfg.fixed_eta) {
    next.weights = advance(state.weights, phi, *cfg.fixed_eta, *cfg.fixed_eta, *cfg.kernel);
  } else if (!std::isfinite(rate.eta)) {
    // Every estimate so far is zero; only the kernel mixing applies.
    next.weights = advance(state.weights, phi, 1.0, 1.0, *cfg.kernel);
  } else if (!std::isfinite(state.eta_prev)) {
    next.weights = advance(state.weights, phi, rate.eta, rate.eta, *cfg.kernel);
  } else {
    next.weights = advance(state.weights, phi, state.eta_prev, rate.eta, *cfg.kernel);
  }
  next.last_p = plan.p;
  next.last_q = plan.q;

  RoundRecord rec;
  rec.t = state.t;
  rec.p = std::move(plan.p);
  rec.q = std::move(plan.q);
  rec.selected = selected;
  rec.outcome = std::move(outcome);
  rec.obs_prob = std::move(plan.obs_prob);
  rec.phi = std::move(phi);
  rec.v = rate.v;
  rec.d = rate.d;
  rec.V = rate.V;
  rec.D = rate.D;
  rec.eta = rate.eta;
  rec.epsilon = plan.epsilon;
  rec.psi = psi;
  return {std::move(rec), std::move(next)};
}

/// Loss access restricted to what the feedback reveals; counts every query.
class LossOracle {
 public:
  explicit LossOracle(std::span<const double> losses) : losses_(losses) {}

  double operator()(std::size_t m) {
    ++queries_;
    return losses_[m];
  }

  std::size_t queries() const { return queries_; }

 private:
  std::span<const double> losses_;
  std::size_t queries_ = 0;
};

/// One full round. The loss source is only called for observed experts.
template <typename LossSource>
std::pair<RoundRecord, LearnerState> step(const LearnerState& state, const LearnerConfig& cfg,
                                          const FeedbackMatrix& matrix, LossSource&& loss_of, Rng& rng) {
  auto plan = plan_round(state, cfg, matrix);
  const std::size_t selected = select(plan.q, rng);
  auto outcome = sample_observations(matrix, selected, loss_of, rng);
  return finish_round(state, cfg, std::move(plan), selected, std::move(outcome));
}

}  // namespace pmexpert

#endif  // PMEXPERT_LEARNER_HPP
