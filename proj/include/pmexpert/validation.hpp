#ifndef PMEXPERT_VALIDATION_HPP
#define PMEXPERT_VALIDATION_HPP

// Randomized self-checks shared by the `validate` command and the test
// suites. Each check is deterministic given its seed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "pmexpert/class_network.hpp"
#include "pmexpert/environment.hpp"
#include "pmexpert/evaluation.hpp"
#include "pmexpert/feedback.hpp"
#include "pmexpert/learner.hpp"
#include "pmexpert/oracle.hpp"
#include "pmexpert/random.hpp"

namespace pmexpert {

struct CheckResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;  // check-specific figure of merit
  std::string detail;
};

namespace validation_detail {

inline std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

inline double uniform_in(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

/// Random matrix with entries in [0, 1] and every row summing to at least 1.
inline FeedbackMatrix random_strict_matrix(std::size_t m, Rng& rng) {
  std::vector<std::vector<double>> rows(m, std::vector<double>(m, 0.0));
  const double density = uniform_in(rng, 0.2, 1.0);
  for (auto& row : rows) {
    double sum = 0.0;
    for (auto& x : row) {
      x = rng.uniform() < density ? rng.uniform() : 0.0;
      sum += x;
    }
    if (!(sum > 0.0)) {
      row[uniform_index(rng, m)] = 1.0;
      sum = 1.0;
    }
    if (sum < 1.0)
      for (auto& x : row) x = std::min(1.0, x / sum);
  }
  return FeedbackMatrix(std::move(rows), FeedbackMode::strict);
}

inline std::vector<double> random_distribution(std::size_t n, Rng& rng) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& x : p) sum += (x = 0.05 + rng.uniform());
  for (auto& x : p) x /= sum;
  return p;
}

/// Dense table kernel with one or two classes per expert.
inline KernelPtr random_table_kernel(std::size_t m, Rng& rng) {
  std::vector<ClassId> classes;
  for (std::size_t e = 0; e < m; ++e) {
    classes.push_back({e, 0});
    if (rng.uniform() < 0.5) classes.push_back({e, 1});
  }
  std::vector<std::vector<double>> table;
  for (std::size_t i = 0; i < classes.size(); ++i) table.push_back(random_distribution(classes.size(), rng));
  return std::make_shared<TableKernel>(m, classes, random_distribution(classes.size(), rng), table);
}

/// Random expert sequence of length T reachable under a fixed-share kernel.
inline std::vector<std::size_t> random_switching_sequence(std::size_t m, std::size_t horizon, std::size_t switches,
                                                          Rng& rng) {
  std::vector<std::size_t> cut;
  for (std::size_t k = 0; k < switches && horizon > 1; ++k) cut.push_back(1 + uniform_index(rng, horizon - 1));
  std::sort(cut.begin(), cut.end());
  std::vector<std::size_t> seq(horizon);
  std::size_t cur = uniform_index(rng, m), next_cut = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    while (next_cut < cut.size() && cut[next_cut] == t) {
      if (m > 1) cur = (cur + 1 + uniform_index(rng, m - 1)) % m;
      ++next_cut;
    }
    seq[t] = cur;
  }
  return seq;
}

}  // namespace validation_detail

/// Class recursion against explicit path enumeration, fixed learning rate,
/// M in {2, 3}, T in [t_min, t_max], random kernels and phi >= 0.
inline CheckResult weight_equivalence(std::size_t instances, std::uint64_t seed, std::size_t t_min = 4,
                                      std::size_t t_max = 6, double tolerance = 1e-10) {
  using namespace validation_detail;
  CheckResult res{"weight_equivalence", true, 0.0, {}};
  Rng rng(seed, 11);
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t m = 2 + uniform_index(rng, 2);
    const std::size_t horizon = t_min + uniform_index(rng, t_max - t_min + 1);
    KernelPtr kernel;
    switch (k % 3) {
      case 0: kernel = fixed_kernel(m); break;
      case 1: kernel = fixed_share_kernel(m, uniform_in(rng, 0.01, 0.5), random_distribution(m, rng)); break;
      default: kernel = random_table_kernel(m, rng); break;
    }
    const double eta = uniform_in(rng, 0.1, 2.0);
    std::vector<std::vector<double>> phi(horizon, std::vector<double>(m));
    for (auto& row : phi)
      for (auto& x : row) x = rng.uniform() < 0.3 ? 0.0 : uniform_in(rng, 0.0, 3.0);

    auto w = init_weights(*kernel);
    for (const auto& row : phi) w = advance(w, row, eta, eta, *kernel);
    const auto fast = expert_marginals(w);
    const auto slow = enumerate_weights(*kernel, phi, eta);
    for (std::size_t e = 0; e < m; ++e) {
      const double rel = std::abs(fast[e] - slow[e]) / std::abs(slow[e]);
      res.worst = std::max(res.worst, rel);
      if (!(rel <= tolerance)) {
        res.passed = false;
        res.detail = "instance " + std::to_string(k) + fmt(": expert %g differs by %.3g relative", double(e + 1), rel);
      }
    }
  }
  if (res.passed) res.detail = fmt("%g instances, max relative error %.3g", double(instances), res.worst);
  return res;
}

/// The four per-run inequalities over random strict-feedback games.
inline CheckResult lemma_suite(std::size_t configs, std::size_t horizon, std::uint64_t seed) {
  using namespace validation_detail;
  CheckResult res{"lemma_suite", true, kInfinity, {}};
  Rng rng(seed, 12);
  std::size_t failures = 0;
  for (std::size_t k = 0; k < configs; ++k) {
    const std::size_t m = 2 + uniform_index(rng, 7);
    LearnerConfig cfg;
    cfg.num_experts = m;
    const bool switching = k % 2 == 1;
    cfg.kernel = switching ? fixed_share_kernel(m, uniform_in(rng, 1e-4, 0.05)) : fixed_kernel(m);
    cfg.w_budget = uniform_in(rng, 0.5, 30.0);
    if (rng.uniform() < 0.5) cfg.gamma = uniform_in(rng, 0.2, 5.0);

    std::vector<double> means(m);
    for (auto& x : means) x = rng.uniform();
    const double low = uniform_in(rng, -5.0, 5.0);
    const double width = uniform_in(rng, 0.1, 10.0);
    LossRange range{low, low + width};
    for (auto& x : means) x = low + width * x;
    const auto process = LossProcess::iid(means, uniform_in(rng, 0.0, 0.5) * width, range);

    FeedbackProcess feedback = FeedbackProcess::constant(random_strict_matrix(m, rng));
    if (k % 5 == 4) {
      std::vector<FeedbackMatrix> seq;
      for (std::size_t i = 0; i < horizon; ++i) seq.push_back(random_strict_matrix(m, rng));
      feedback = FeedbackProcess::scripted(std::move(seq));
    }

    const std::uint64_t run_seed = rng.next_u64();
    const auto losses = process.realize(horizon, m, run_seed);
    const auto tr = run_game(cfg, losses, feedback, horizon, run_seed);
    const auto seq = switching ? random_switching_sequence(m, horizon, uniform_index(rng, 6), rng)
                               : std::vector<std::size_t>(horizon, uniform_index(rng, m));
    const auto comp = CompetitorSequence::from_experts(seq);
    const auto diag = check_lemmas(tr, comp, *cfg.kernel, cfg.gamma_value());
    for (const auto* c : diag.all()) {
      if (c->worst_slack < res.worst) res.worst = c->worst_slack;
      if (!c->passed) {
        ++failures;
        res.passed = false;
        res.detail = "config " + std::to_string(k) + ": " + c->name + " failed at round " +
                     std::to_string(c->worst_round) + (c->detail.empty() ? "" : " (" + c->detail + ")");
      }
    }
  }
  if (res.passed)
    res.detail = fmt("%g configs x %g rounds, worst relative slack %.3g", double(configs), double(horizon), res.worst);
  else
    res.detail = std::to_string(failures) + " failed checks; last: " + res.detail;
  return res;
}

struct AffineOutcome {
  double max_q_diff = 0.0;
  bool same_selections = true;
  bool same_indicators = true;
  double regret_scale_error = 0.0;
  double normalized_diff = 0.0;
  double base_regret = 0.0;
  double transformed_regret = 0.0;
};

/// Runs the same game on losses l and a*l + b and compares the transcripts.
inline AffineOutcome affine_compare(double a, double b, std::size_t m, std::size_t horizon, std::uint64_t seed) {
  using namespace validation_detail;
  Rng rng(seed, 13);
  std::vector<double> means(m);
  for (auto& x : means) x = uniform_in(rng, 0.2, 0.8);
  const LossRange base_range{0.0, 1.0};
  const auto base = LossProcess::iid(means, 0.2, base_range).realize(horizon, m, seed);
  LossMatrix moved(horizon, m);
  for (std::size_t t = 0; t < horizon; ++t)
    for (std::size_t e = 0; e < m; ++e) moved(t, e) = a * base(t, e) + b;
  const LossRange moved_range{b, a + b};

  LearnerConfig cfg;
  cfg.num_experts = m;
  cfg.kernel = fixed_kernel(m);
  cfg.w_budget = std::log(static_cast<double>(m));
  const auto feedback = FeedbackProcess::constant(FeedbackMatrix::bandit(m));
  const auto t0 = run_game(cfg, base, feedback, horizon, seed);
  const auto t1 = run_game(cfg, moved, feedback, horizon, seed);
  const auto comp = best_competitor(base, *cfg.kernel, 0);
  const auto r0 = realized_regret(t0, comp, base, base_range);
  const auto r1 = realized_regret(t1, comp, moved, moved_range);

  AffineOutcome out;
  for (std::size_t i = 0; i < horizon; ++i) {
    const auto& x = t0.records[i];
    const auto& y = t1.records[i];
    for (std::size_t e = 0; e < m; ++e) out.max_q_diff = std::max(out.max_q_diff, std::abs(x.q[e] - y.q[e]));
    out.same_selections = out.same_selections && x.selected == y.selected;
    out.same_indicators = out.same_indicators && x.outcome.indicators == y.outcome.indicators;
  }
  out.base_regret = r0.realized_regret;
  out.transformed_regret = r1.realized_regret;
  out.regret_scale_error = std::abs(r1.realized_regret - a * r0.realized_regret) / std::abs(a * r0.realized_regret);
  out.normalized_diff = std::abs(r1.normalized_regret - r0.normalized_regret);
  return out;
}

inline CheckResult affine_invariance(double a, double b, std::size_t m, std::size_t horizon, std::uint64_t seed) {
  using validation_detail::fmt;
  const auto o = affine_compare(a, b, m, horizon, seed);
  CheckResult res{"affine_invariance", true, o.max_q_diff, {}};
  res.passed = o.max_q_diff <= 1e-6 && o.same_selections && o.same_indicators && o.regret_scale_error <= 1e-9 &&
               o.normalized_diff <= 1e-6;
  res.detail = fmt("a=%g b=%g: ", a, b) + fmt("q diff %.3g, regret scale error %.3g, ", o.max_q_diff,
                                              o.regret_scale_error) +
               fmt("normalized diff %.3g", o.normalized_diff) + (o.same_selections ? "" : ", selections differ") +
               (o.same_indicators ? "" : ", indicators differ");
  return res;
}

struct FrozenRoundResult {
  std::size_t experts = 0;
  std::vector<double> mean_phi;
  std::vector<double> target;  // l_m - E[psi_t | observed m]
  std::vector<double> std_error;
  double worst_z = 0.0;
};

/// Freezes (q, P, losses, psi-so-far) and redraws the selection and the
/// indicators; compares the mean of each phi_m with l_m - E[psi | I_m = 1].
inline FrozenRoundResult frozen_round(std::size_t resamples, std::uint64_t seed) {
  using namespace validation_detail;
  Rng setup(seed, 14);
  const std::size_t m = 2 + uniform_index(setup, 5);
  const auto matrix = random_strict_matrix(m, setup);
  const double epsilon = uniform_in(setup, 0.05, 1.0);
  const auto q = mix_uniform(random_distribution(m, setup), epsilon);
  std::vector<double> losses(m);
  for (auto& x : losses) x = setup.uniform();
  const double psi_prev = setup.uniform() < 0.3 ? kInfinity : uniform_in(setup, 0.0, 1.0);
  const auto o = observation_probabilities(matrix, q);

  FrozenRoundResult r;
  r.experts = m;
  std::vector<double> sum(m, 0.0), sum_sq(m, 0.0), psi_sum(m, 0.0);
  std::vector<std::size_t> hits(m, 0);
  Rng rng(seed, kLearnerStream);
  for (std::size_t k = 0; k < resamples; ++k) {
    const std::size_t i = select(q, rng);
    const auto outcome = sample_observations(matrix, i, std::span<const double>(losses), rng);
    double psi = psi_prev;
    for (const auto& [e, l] : outcome.observed_losses) psi = std::min(psi, l);
    const auto phi = estimate(outcome, o, psi);
    for (std::size_t e = 0; e < m; ++e) {
      sum[e] += phi[e];
      sum_sq[e] += phi[e] * phi[e];
      if (outcome.indicators[e]) {
        ++hits[e];
        psi_sum[e] += psi;
      }
    }
  }
  const double n = static_cast<double>(resamples);
  for (std::size_t e = 0; e < m; ++e) {
    const double mean = sum[e] / n;
    const double var = std::max(0.0, (sum_sq[e] - n * mean * mean) / (n - 1.0));
    const double target = hits[e] ? losses[e] - psi_sum[e] / static_cast<double>(hits[e]) : 0.0;
    const double se = std::sqrt(var / n);
    r.mean_phi.push_back(mean);
    r.target.push_back(target);
    r.std_error.push_back(se);
    const double z = se > 0.0 ? std::abs(mean - target) / se : (std::abs(mean - target) > 1e-12 ? kInfinity : 0.0);
    r.worst_z = std::max(r.worst_z, z);
  }
  return r;
}

inline CheckResult estimator_unbiasedness(std::size_t rounds, std::size_t resamples, std::uint64_t seed) {
  using validation_detail::fmt;
  CheckResult res{"estimator_unbiasedness", true, 0.0, {}};
  for (std::size_t k = 0; k < rounds; ++k) {
    const auto r = frozen_round(resamples, seed + k);
    res.worst = std::max(res.worst, r.worst_z);
    if (!(r.worst_z <= 4.0)) {
      res.passed = false;
      res.detail = "frozen round " + std::to_string(k) + fmt(" off by %.3g standard errors", r.worst_z);
    }
  }
  if (res.passed)
    res.detail = fmt("%g frozen rounds x %g resamples, worst |z| %.3g", double(rounds), double(resamples), res.worst);
  return res;
}

struct ExpectationCase {
  Scenario scenario;
  CompetitorSequence competitor;
};

/// Tiny M = 2 games with scripted losses and a fixed competitor sequence.
inline ExpectationCase expectation_case(std::size_t horizon, std::uint64_t seed) {
  using namespace validation_detail;
  Rng rng(seed, 15);
  const std::size_t m = 2;
  LossMatrix losses(horizon, m);
  for (std::size_t t = 0; t < horizon; ++t)
    for (std::size_t e = 0; e < m; ++e) losses(t, e) = rng.uniform();
  ExpectationCase c;
  auto& sc = c.scenario;
  sc.learner.num_experts = m;
  const bool switching = rng.uniform() < 0.5;
  sc.learner.kernel = switching ? fixed_share_kernel(m, uniform_in(rng, 0.05, 0.4)) : fixed_kernel(m);
  sc.learner.w_budget = uniform_in(rng, 0.5, 3.0);
  sc.losses = LossProcess::scripted(losses, {0.0, 1.0});
  sc.feedback = FeedbackProcess::constant(rng.uniform() < 0.5 ? FeedbackMatrix::bandit(m)
                                                               : random_strict_matrix(m, rng));
  sc.horizon = horizon;
  const auto seq = switching ? random_switching_sequence(m, horizon, uniform_index(rng, 2), rng)
                             : std::vector<std::size_t>(horizon, uniform_index(rng, m));
  sc.competitor = CompetitorSpec::sequence(seq);
  sc.base_seed = rng.next_u64() >> 20;
  c.competitor = CompetitorSequence::from_experts(seq);
  return c;
}

inline CheckResult exact_expectation(std::size_t instances, std::size_t seeds, std::size_t threads,
                                     std::uint64_t seed) {
  using validation_detail::fmt;
  CheckResult res{"exact_expectation", true, 0.0, {}};
  for (std::size_t k = 0; k < instances; ++k) {
    const auto c = expectation_case(1 + k % 2, seed + k);
    const auto& sc = c.scenario;
    const double exact =
        exact_expected_regret(sc.learner, sc.losses.scripted_losses(), sc.feedback, c.competitor, sc.horizon);
    const auto mc = monte_carlo(sc, seeds, threads);
    const double gap = std::abs(mc.mean_regret - exact);
    const double z = mc.std_error > 0.0 ? gap / mc.std_error : (gap > 1e-12 ? kInfinity : 0.0);
    res.worst = std::max(res.worst, z);
    if (!(z <= 4.0)) {
      res.passed = false;
      res.detail = "instance " + std::to_string(k) + fmt(": exact %.6g, Monte-Carlo %.6g (z %.3g)", exact,
                                                         mc.mean_regret, z);
    }
  }
  if (res.passed)
    res.detail = fmt("%g instances x %g seeds, worst |z| %.3g", double(instances), double(seeds), res.worst);
  return res;
}

/// Default suite run by the `validate` command.
inline std::vector<CheckResult> default_validation(std::size_t threads = 1, std::uint64_t seed = 20240601) {
  std::vector<CheckResult> out;
  out.push_back(weight_equivalence(50, seed));
  out.push_back(lemma_suite(100, 2000, seed));
  out.push_back(affine_invariance(0.5, -5.0, 4, 1000, seed));
  out.push_back(affine_invariance(3.0, 10.0, 4, 1000, seed));
  out.push_back(estimator_unbiasedness(10, 20000, seed));
  out.push_back(exact_expectation(4, 20000, threads, seed));
  return out;
}

inline void print_checks(std::ostream& os, const std::vector<CheckResult>& checks) {
  for (const auto& c : checks) os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
}

}  // namespace pmexpert

#endif  // PMEXPERT_VALIDATION_HPP
