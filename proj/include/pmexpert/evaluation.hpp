#ifndef PMEXPERT_EVALUATION_HPP
#define PMEXPERT_EVALUATION_HPP

// Regret accounting, closed-form regret bounds, per-run inequality
// diagnostics, Monte-Carlo batches and scaling fits.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "pmexpert/class_network.hpp"
#include "pmexpert/environment.hpp"
#include "pmexpert/error.hpp"
#include "pmexpert/learner.hpp"

namespace pmexpert {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kLemmaTolerance = 1e-8;

struct LemmaCheck {
  explicit LemmaCheck(std::string n = {}) : name(std::move(n)) {}

  std::string name;
  bool passed = true;
  double final_lhs = 0.0;
  double final_rhs = 0.0;
  /// min over rounds of (rhs - lhs); negative means violated.
  double worst_slack = kInfinity;
  std::size_t worst_round = 0;
  std::string detail;
};

struct LemmaDiagnostics {
  LemmaCheck second_order{"second_order_sum"};
  LemmaCheck rate_drift{"rate_drift"};
  LemmaCheck estimate_regret{"estimate_regret"};
  LemmaCheck observation_floor{"observation_floor"};

  std::vector<const LemmaCheck*> all() const {
    return {&second_order, &rate_drift, &estimate_regret, &observation_floor};
  }

  bool all_passed() const {
    return second_order.passed && rate_drift.passed && estimate_regret.passed && observation_floor.passed;
  }
};

struct RegretBound {
  double theorem = kNaN;
  double cleaner = kNaN;
};

struct RegretReport {
  double realized_regret = 0.0;
  double cumulative_loss = 0.0;
  double competitor_loss = 0.0;
  double normalized_regret = 0.0;
  double complexity = kNaN;
  double bound_value = kNaN;
  double bound_cleaner = kNaN;
  std::optional<LemmaDiagnostics> diagnostics;
  std::vector<std::string> warnings;
};

inline RegretReport realized_regret(const GameTranscript& transcript, const CompetitorSequence& competitor,
                                    const LossMatrix& losses, const LossRange& range) {
  const std::size_t horizon = transcript.records.size();
  if (competitor.size() != horizon)
    throw Error(ErrorCode::LengthMismatch, "competitor has " + std::to_string(competitor.size()) +
                                               " rounds, transcript has " + std::to_string(horizon));
  if (losses.rounds() < horizon) throw Error(ErrorCode::LengthMismatch, "loss matrix shorter than game");
  RegretReport r;
  for (std::size_t t = 0; t < horizon; ++t) {
    r.cumulative_loss += losses(t, transcript.records[t].selected);
    r.competitor_loss += losses(t, competitor.expert_at(t));
  }
  r.realized_regret = r.cumulative_loss - r.competitor_loss;
  r.normalized_regret = r.realized_regret / range.width();
  return r;
}

/// Normalized expected-regret bound at horizon T for complexity w_t.
inline RegretBound theoretical_bound(std::size_t num_experts, double w_t, double gamma,
                                     const EpsilonSchedule& schedule, std::size_t horizon) {
  if (horizon == 0) throw Error(ErrorCode::InvalidArgument, "horizon must be at least 1");
  const double m = static_cast<double>(num_experts);
  double sum_eps = 0.0;
  double sum_inv = 0.0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const double e = schedule.at(t);
    sum_eps += e;
    sum_inv += 1.0 / e;
  }
  const double eps_last = schedule.at(horizon);
  const double m_over_eps = m / eps_last;
  const double root = std::sqrt(m * sum_inv);

  RegretBound b;
  b.theorem = 1.0 + m_over_eps + sum_eps + gamma * root +
              (w_t + gamma) / gamma * std::sqrt(m * sum_inv + m_over_eps * m_over_eps);
  b.cleaner = 1.0 + sum_eps + (w_t + 2.0 * gamma) / gamma * m_over_eps +
              (w_t + gamma + gamma * gamma) / gamma * root;
  return b;
}

namespace detail {

inline void record_check(LemmaCheck& c, double lhs, double rhs, std::size_t round) {
  const double slack = rhs - lhs;
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  if (slack < c.worst_slack) {
    c.worst_slack = slack;
    c.worst_round = round;
  }
  if (!(lhs <= rhs + kLemmaTolerance * scale)) c.passed = false;
  c.final_lhs = lhs;
  c.final_rhs = rhs;
}

}  // namespace detail

/// Evaluates four deterministic inequalities after every round T:
///   second_order_sum   sum_t eta_t v_t / 2                 <= gamma sqrt(V_T)
///   rate_drift         sum_t (1 - eta_t / eta_{t-1}) d_t   <= sqrt(V_T + D_T^2)
///   estimate_regret    sum_t (E_p[phi_t] - phi_{t,s_t})    <= (W_T + gamma) / gamma sqrt(V_T + D_T^2)
///                                                             + gamma sqrt(V_T)
///   observation_floor  eps_t / M                           <= min_m o_{t,m}
/// where W_T is the complexity of the competitor prefix. A rate that increases
/// between rounds breaks the premise of rate_drift and fails that check.
inline LemmaDiagnostics check_lemmas(const GameTranscript& transcript, const CompetitorSequence& competitor,
                                     const TransitionKernel& kernel, double gamma) {
  const auto& recs = transcript.records;
  if (competitor.size() != recs.size())
    throw Error(ErrorCode::LengthMismatch, "competitor length differs from transcript");
  LemmaDiagnostics diag;
  double phi2_lhs = 0.0;
  double drift_lhs = 0.0;
  double est_lhs = 0.0;
  double log_mass = 0.0;
  double eta_before = kInfinity;

  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    const std::size_t round = i + 1;

    if (r.v != 0.0) phi2_lhs += 0.5 * r.eta * r.v;
    detail::record_check(diag.second_order, phi2_lhs, gamma * std::sqrt(r.V), round);

    double ratio = 1.0;
    if (std::isfinite(eta_before) && std::isfinite(r.eta)) ratio = r.eta / eta_before;
    if (ratio > 1.0 + kRateTolerance && diag.rate_drift.detail.empty()) {
      diag.rate_drift.passed = false;
      diag.rate_drift.detail = "learning rate increased at round " + std::to_string(round);
    }
    drift_lhs += (1.0 - ratio) * r.d;
    detail::record_check(diag.rate_drift, drift_lhs, std::sqrt(r.V + r.D * r.D), round);
    eta_before = r.eta;

    double mean_phi = 0.0;
    for (std::size_t m = 0; m < r.phi.size(); ++m) mean_phi += r.p[m] * r.phi[m];
    est_lhs += mean_phi - r.phi[competitor.expert_at(i)];
    const double tw = i == 0 ? kernel.prior_weight(competitor.classes[0])
                             : kernel.transition_weight(competitor.classes[i - 1], competitor.classes[i], i);
    if (!(tw > 0.0))
      throw Error(ErrorCode::ZeroTransition, "competitor leaves the kernel support at round " +
                                                 std::to_string(round));
    log_mass += std::log(tw);
    const double w = std::log(static_cast<double>(kernel.max_class_count(round))) - log_mass;
    const double root_all = std::sqrt(r.V + r.D * r.D);
    detail::record_check(diag.estimate_regret, est_lhs,
                         (w + gamma) / gamma * root_all + gamma * std::sqrt(r.V), round);

    const double floor = r.epsilon / static_cast<double>(r.obs_prob.size());
    const double min_obs = *std::min_element(r.obs_prob.begin(), r.obs_prob.end());
    detail::record_check(diag.observation_floor, floor, min_obs, round);
  }
  return diag;
}

/// Regret plus complexity, bound and diagnostics, using the transcript's
/// learner configuration. The bound takes the competitor's realized
/// complexity; gamma and epsilon keep the configured budget.
inline RegretReport evaluate_run(const GameTranscript& transcript, const CompetitorSequence& competitor,
                                 const LossMatrix& losses, const LossRange& range) {
  auto report = realized_regret(transcript, competitor, losses, range);
  const auto& cfg = transcript.config;
  const double gamma = cfg.gamma_value();
  try {
    report.complexity = complexity(*cfg.kernel, competitor);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ZeroTransition) throw;
    report.warnings.push_back("competitor lies outside the kernel support; no bound applies");
    return report;
  }
  if (report.complexity > cfg.w_budget * (1.0 + 1e-12))
    report.warnings.push_back("competitor complexity " + std::to_string(report.complexity) +
                              " exceeds the W budget " + std::to_string(cfg.w_budget));
  const auto bound =
      theoretical_bound(cfg.num_experts, report.complexity, gamma, cfg.schedule(), transcript.records.size());
  report.bound_value = bound.theorem;
  report.bound_cleaner = bound.cleaner;
  report.diagnostics = check_lemmas(transcript, competitor, *cfg.kernel, gamma);
  return report;
}

/// How the comparator of a run is chosen.
struct CompetitorSpec {
  enum class Kind { fixed, best_fixed, best_k_switch, sequence };
  Kind kind = Kind::best_fixed;
  std::size_t expert = 0;
  std::size_t switches = 0;
  std::vector<std::size_t> experts;

  static CompetitorSpec fixed(std::size_t m) { return {Kind::fixed, m, 0, {}}; }
  static CompetitorSpec best_fixed() { return {Kind::best_fixed, 0, 0, {}}; }
  static CompetitorSpec best_k_switch(std::size_t k) { return {Kind::best_k_switch, 0, k, {}}; }
  static CompetitorSpec sequence(std::vector<std::size_t> e) { return {Kind::sequence, 0, 0, std::move(e)}; }

  CompetitorSequence resolve(const LossMatrix& losses, const TransitionKernel& kernel,
                             std::size_t horizon) const {
    switch (kind) {
      case Kind::fixed: {
        if (expert >= losses.experts()) throw Error(ErrorCode::InvalidArgument, "competitor expert out of range");
        std::vector<std::size_t> e(horizon, expert);
        return CompetitorSequence::from_experts(e);
      }
      case Kind::best_fixed:
        return best_competitor(losses, kernel, 0);
      case Kind::best_k_switch:
        return best_competitor(losses, kernel, switches);
      case Kind::sequence: {
        if (experts.size() < horizon)
          throw Error(ErrorCode::LengthMismatch, "explicit competitor is shorter than the horizon");
        for (auto m : experts)
          if (m >= losses.experts()) throw Error(ErrorCode::InvalidArgument, "competitor expert out of range");
        return CompetitorSequence::from_experts(std::span<const std::size_t>(experts.data(), horizon));
      }
    }
    return {};
  }
};

/// Everything needed to play and score one game per seed.
struct Scenario {
  LearnerConfig learner;
  LossProcess losses = LossProcess::iid({0.5}, 0.0, {});
  FeedbackProcess feedback = FeedbackProcess::full(1);
  std::size_t horizon = 1;
  CompetitorSpec competitor;
  std::uint64_t base_seed = 0;
};

struct RunArtifacts {
  std::uint64_t seed = 0;
  LossMatrix losses;
  GameTranscript transcript;
  CompetitorSequence competitor;
  RegretReport report;
};

inline RunArtifacts run_scenario(const Scenario& sc, std::uint64_t seed) {
  RunArtifacts a;
  a.seed = seed;
  a.losses = sc.losses.realize(sc.horizon, sc.learner.num_experts, seed);
  a.transcript = run_game(sc.learner, a.losses, sc.feedback, sc.horizon, seed);
  a.competitor = sc.competitor.resolve(a.losses, *sc.learner.kernel, sc.horizon);
  a.report = evaluate_run(a.transcript, a.competitor, a.losses, sc.losses.range());
  return a;
}

struct RunSummary {
  std::uint64_t seed = 0;
  double regret = 0.0;
  double normalized_regret = 0.0;
  double complexity = kNaN;
  bool lemmas_passed = true;
};

struct BatchSummary {
  std::size_t n_seeds = 0;
  double mean_regret = 0.0;
  double std_error = 0.0;
  bool std_error_defined = false;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double mean_normalized_regret = 0.0;
  double normalized_std_error = 0.0;
  double normalized_ci_low = 0.0;
  double normalized_ci_high = 0.0;
  double max_complexity = kNaN;
  double bound_value = kNaN;
  double bound_cleaner = kNaN;
  std::size_t lemma_failures = 0;
  std::vector<std::string> warnings;
  std::vector<RunSummary> runs;
};

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  bool defined = false;
};

inline MeanEstimate mean_and_std_error(std::span<const double> xs) {
  MeanEstimate e;
  if (xs.empty()) return e;
  double sum = 0.0;
  for (double x : xs) sum += x;
  e.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return e;
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  e.std_error = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  e.defined = true;
  return e;
}

inline constexpr double kZ95 = 1.959963984540054;

/// Seeds base_seed, base_seed + 1, ...; results do not depend on threads.
inline BatchSummary monte_carlo(const Scenario& sc, std::size_t n_seeds, std::size_t threads = 1) {
  if (n_seeds == 0) throw Error(ErrorCode::InvalidArgument, "need at least one seed");
  std::vector<RunSummary> runs(n_seeds);
  std::vector<std::vector<std::string>> warnings(n_seeds);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n_seeds);

  auto worker = [&] {
    for (std::size_t i = next++; i < n_seeds; i = next++) {
      try {
        const std::uint64_t seed = sc.base_seed + i;
        const auto a = run_scenario(sc, seed);
        runs[i] = {seed, a.report.realized_regret, a.report.normalized_regret, a.report.complexity,
                   !a.report.diagnostics || a.report.diagnostics->all_passed()};
        warnings[i] = a.report.warnings;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, n_seeds));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  BatchSummary s;
  s.n_seeds = n_seeds;
  std::vector<double> reg(n_seeds), norm(n_seeds);
  for (std::size_t i = 0; i < n_seeds; ++i) {
    reg[i] = runs[i].regret;
    norm[i] = runs[i].normalized_regret;
    if (!runs[i].lemmas_passed) ++s.lemma_failures;
    if (std::isfinite(runs[i].complexity))
      s.max_complexity = std::isnan(s.max_complexity) ? runs[i].complexity
                                                       : std::max(s.max_complexity, runs[i].complexity);
    for (auto& w : warnings[i])
      if (std::find(s.warnings.begin(), s.warnings.end(), w) == s.warnings.end()) s.warnings.push_back(w);
  }
  const auto r = mean_and_std_error(reg);
  const auto n = mean_and_std_error(norm);
  s.mean_regret = r.mean;
  s.std_error = r.std_error;
  s.std_error_defined = r.defined;
  s.ci_low = r.mean - kZ95 * r.std_error;
  s.ci_high = r.mean + kZ95 * r.std_error;
  s.mean_normalized_regret = n.mean;
  s.normalized_std_error = n.std_error;
  s.normalized_ci_low = n.mean - kZ95 * n.std_error;
  s.normalized_ci_high = n.mean + kZ95 * n.std_error;
  if (std::isfinite(s.max_complexity)) {
    const auto b = theoretical_bound(sc.learner.num_experts, s.max_complexity, sc.learner.gamma_value(),
                                     sc.learner.schedule(), sc.horizon);
    s.bound_value = b.theorem;
    s.bound_cleaner = b.cleaner;
  }
  s.runs = std::move(runs);
  return s;
}

struct ScalingPoint {
  double horizon = 0.0;
  double mean_regret = 0.0;
};

/// Least-squares slope of log(mean regret) against log(horizon).
inline double fit_scaling(std::span<const ScalingPoint> points) {
  if (points.size() < 4) throw Error(ErrorCode::DegenerateFit, "need at least four horizons");
  double sx = 0.0, sy = 0.0;
  for (const auto& p : points) {
    if (!(p.mean_regret > 0.0) || !(p.horizon > 0.0))
      throw Error(ErrorCode::DegenerateFit, "regret and horizon must be positive for a log-log fit");
    sx += std::log(p.horizon);
    sy += std::log(p.mean_regret);
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(p.horizon) - mx;
    sxy += dx * (std::log(p.mean_regret) - my);
    sxx += dx * dx;
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::DegenerateFit, "horizons must differ");
  return sxy / sxx;
}

}  // namespace pmexpert

#endif  // PMEXPERT_EVALUATION_HPP
