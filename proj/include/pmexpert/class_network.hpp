#ifndef PMEXPERT_CLASS_NETWORK_HPP
#define PMEXPERT_CLASS_NETWORK_HPP

// Equivalence-class weights over competitor sequences.
//
// A class carries at least the expert it currently selects; kernels may attach
// an opaque tag for any extra parameters. Class weights live in the natural-log
// domain and are shared between rounds through a transition kernel, with the
// exponential update raised to the ratio of consecutive learning rates.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmexpert/error.hpp"

namespace pmexpert {

struct ClassId {
  std::size_t expert = 0;
  std::uint64_t tag = 0;

  friend auto operator<=>(const ClassId&, const ClassId&) = default;
};

struct Transition {
  ClassId to;
  double weight = 0.0;
};

inline constexpr double kKernelSumTolerance = 1e-9;

/// Prior over class successions. Round indices start at 1; class_set(t) is the
/// set alive at round t and transition(c, t) distributes the mass of class c at
/// round t over class_set(t + 1).
class TransitionKernel {
 public:
  virtual ~TransitionKernel() = default;

  virtual std::size_t num_experts() const = 0;
  /// Sorted ascending.
  virtual std::vector<ClassId> class_set(std::size_t t) const = 0;
  virtual std::vector<Transition> initial_prior() const = 0;
  virtual std::vector<Transition> transition(const ClassId& from, std::size_t t) const = 0;

  /// max over 1 <= t <= horizon of |class_set(t - 1)|, with the virtual root
  /// set at t = 0 counted as a single class.
  virtual std::size_t max_class_count(std::size_t horizon) const {
    std::size_t best = 1;
    for (std::size_t t = 1; t + 1 <= horizon; ++t) best = std::max(best, class_set(t).size());
    return best;
  }

  double prior_weight(const ClassId& c) const {
    for (const auto& tr : initial_prior())
      if (tr.to == c) return tr.weight;
    return 0.0;
  }

  double transition_weight(const ClassId& from, const ClassId& to, std::size_t t) const {
    for (const auto& tr : transition(from, t))
      if (tr.to == to) return tr.weight;
    return 0.0;
  }
};

using KernelPtr = std::shared_ptr<const TransitionKernel>;

/// Identity transitions with a uniform prior; one class per expert.
class FixedKernel final : public TransitionKernel {
 public:
  explicit FixedKernel(std::size_t num_experts) : m_(num_experts) {
    if (m_ == 0) throw Error(ErrorCode::InvalidArgument, "kernel needs at least one expert");
  }

  std::size_t num_experts() const override { return m_; }

  std::vector<ClassId> class_set(std::size_t) const override {
    std::vector<ClassId> out(m_);
    for (std::size_t m = 0; m < m_; ++m) out[m] = ClassId{m, 0};
    return out;
  }

  std::vector<Transition> initial_prior() const override {
    std::vector<Transition> out(m_);
    for (std::size_t m = 0; m < m_; ++m) out[m] = {ClassId{m, 0}, 1.0 / static_cast<double>(m_)};
    return out;
  }

  std::vector<Transition> transition(const ClassId& from, std::size_t) const override {
    return {Transition{from, 1.0}};
  }

  std::size_t max_class_count(std::size_t horizon) const override { return horizon >= 2 ? m_ : 1; }

 private:
  std::size_t m_;
};

/// Switching competition: stay with weight 1 - alpha, move to each other
/// expert with weight alpha / (M - 1).
class FixedShareKernel final : public TransitionKernel {
 public:
  FixedShareKernel(std::size_t num_experts, double alpha, std::vector<double> prior = {})
      : m_(num_experts), alpha_(alpha), prior_(std::move(prior)) {
    if (m_ == 0) throw Error(ErrorCode::InvalidArgument, "kernel needs at least one expert");
    if (!(alpha_ >= 0.0 && alpha_ <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "fixed-share alpha must lie in [0, 1]");
    if (prior_.empty()) prior_.assign(m_, 1.0 / static_cast<double>(m_));
    if (prior_.size() != m_)
      throw Error(ErrorCode::DimensionMismatch, "fixed-share prior has wrong length");
  }

  double alpha() const { return alpha_; }
  std::size_t num_experts() const override { return m_; }

  std::vector<ClassId> class_set(std::size_t) const override {
    std::vector<ClassId> out(m_);
    for (std::size_t m = 0; m < m_; ++m) out[m] = ClassId{m, 0};
    return out;
  }

  std::vector<Transition> initial_prior() const override {
    std::vector<Transition> out(m_);
    for (std::size_t m = 0; m < m_; ++m) out[m] = {ClassId{m, 0}, prior_[m]};
    return out;
  }

  std::vector<Transition> transition(const ClassId& from, std::size_t) const override {
    if (m_ == 1) return {Transition{from, 1.0}};
    const double move = alpha_ / static_cast<double>(m_ - 1);
    std::vector<Transition> out(m_);
    for (std::size_t m = 0; m < m_; ++m)
      out[m] = {ClassId{m, 0}, m == from.expert ? 1.0 - alpha_ : move};
    return out;
  }

  std::size_t max_class_count(std::size_t horizon) const override { return horizon >= 2 ? m_ : 1; }

 private:
  std::size_t m_;
  double alpha_;
  std::vector<double> prior_;
};

/// Time-homogeneous kernel given by an explicit table over arbitrary classes.
class TableKernel final : public TransitionKernel {
 public:
  TableKernel(std::size_t num_experts, std::vector<ClassId> classes, std::vector<double> prior,
              std::vector<std::vector<double>> table)
      : m_(num_experts), classes_(std::move(classes)), prior_(std::move(prior)), table_(std::move(table)) {
    const std::size_t n = classes_.size();
    if (n == 0) throw Error(ErrorCode::EmptyClassSet, "custom kernel has no classes");
    if (prior_.size() != n || table_.size() != n)
      throw Error(ErrorCode::DimensionMismatch, "custom kernel prior/table size mismatch");
    for (const auto& row : table_)
      if (row.size() != n) throw Error(ErrorCode::DimensionMismatch, "custom kernel table is not square");
    for (const auto& c : classes_)
      if (c.expert >= m_) throw Error(ErrorCode::InvalidKernel, "custom kernel class names an unknown expert");
    // Keep the class list sorted and permute the prior/table to match.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return classes_[a] < classes_[b]; });
    std::vector<ClassId> c2(n);
    std::vector<double> p2(n);
    std::vector<std::vector<double>> t2(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      c2[i] = classes_[order[i]];
      p2[i] = prior_[order[i]];
      for (std::size_t j = 0; j < n; ++j) t2[i][j] = table_[order[i]][order[j]];
    }
    for (std::size_t i = 1; i < n; ++i)
      if (c2[i] == c2[i - 1]) throw Error(ErrorCode::InvalidKernel, "custom kernel repeats a class");
    classes_ = std::move(c2);
    prior_ = std::move(p2);
    table_ = std::move(t2);
  }

  std::size_t num_experts() const override { return m_; }
  std::vector<ClassId> class_set(std::size_t) const override { return classes_; }

  std::vector<Transition> initial_prior() const override {
    std::vector<Transition> out(classes_.size());
    for (std::size_t i = 0; i < classes_.size(); ++i) out[i] = {classes_[i], prior_[i]};
    return out;
  }

  std::vector<Transition> transition(const ClassId& from, std::size_t) const override {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), from);
    if (it == classes_.end() || *it != from)
      throw Error(ErrorCode::InvalidKernel, "transition requested from a class outside the table");
    const auto& row = table_[static_cast<std::size_t>(it - classes_.begin())];
    std::vector<Transition> out(classes_.size());
    for (std::size_t j = 0; j < classes_.size(); ++j) out[j] = {classes_[j], row[j]};
    return out;
  }

  std::size_t max_class_count(std::size_t horizon) const override {
    return horizon >= 2 ? classes_.size() : 1;
  }

 private:
  std::size_t m_;
  std::vector<ClassId> classes_;
  std::vector<double> prior_;
  std::vector<std::vector<double>> table_;
};

inline KernelPtr fixed_kernel(std::size_t num_experts) {
  return std::make_shared<FixedKernel>(num_experts);
}

inline KernelPtr fixed_share_kernel(std::size_t num_experts, double alpha, std::vector<double> prior = {}) {
  return std::make_shared<FixedShareKernel>(num_experts, alpha, std::move(prior));
}

namespace detail {

inline void check_distribution(const std::vector<Transition>& dist, const std::vector<ClassId>& support,
                               const std::string& what) {
  double sum = 0.0;
  for (const auto& tr : dist) {
    if (!(tr.weight >= 0.0) || !std::isfinite(tr.weight))
      throw Error(ErrorCode::InvalidKernel, what + " has a negative or non-finite weight");
    if (!std::binary_search(support.begin(), support.end(), tr.to))
      throw Error(ErrorCode::InvalidKernel, what + " puts weight outside the class set");
    sum += tr.weight;
  }
  if (std::abs(sum - 1.0) > kKernelSumTolerance)
    throw Error(ErrorCode::InvalidKernel, what + " sums to " + std::to_string(sum));
}

/// Streaming log-sum-exp.
struct LogSumExp {
  double max = -std::numeric_limits<double>::infinity();
  double scaled_sum = 0.0;

  void add(double x) {
    if (x == -std::numeric_limits<double>::infinity()) return;
    if (x > max) {
      scaled_sum = scaled_sum * std::exp(max - x) + 1.0;
      max = x;
    } else {
      scaled_sum += std::exp(x - max);
    }
  }

  double value() const {
    if (scaled_sum == 0.0) return -std::numeric_limits<double>::infinity();
    return max + std::log(scaled_sum);
  }
};

}  // namespace detail

/// Checks prior and transition rows for rounds 1..rounds.
inline void validate(const TransitionKernel& kernel, std::size_t rounds = 2) {
  if (kernel.num_experts() == 0) throw Error(ErrorCode::InvalidKernel, "kernel has no experts");
  const auto first = kernel.class_set(1);
  if (first.empty()) throw Error(ErrorCode::EmptyClassSet, "class set at round 1 is empty");
  for (const auto& c : first)
    if (c.expert >= kernel.num_experts())
      throw Error(ErrorCode::InvalidKernel, "class names an unknown expert");
  detail::check_distribution(kernel.initial_prior(), first, "initial prior");
  for (std::size_t t = 1; t <= rounds; ++t) {
    const auto next = kernel.class_set(t + 1);
    for (const auto& c : kernel.class_set(t))
      detail::check_distribution(kernel.transition(c, t), next,
                                 "transition row from expert " + std::to_string(c.expert) + " tag " +
                                     std::to_string(c.tag) + " at round " + std::to_string(t));
  }
}

/// Log-domain class weights at a given round, sorted by class.
struct ClassWeights {
  std::size_t num_experts = 0;
  std::size_t round = 1;
  std::vector<std::pair<ClassId, double>> log_weights;

  double log_weight(const ClassId& c) const {
    const auto it = std::lower_bound(log_weights.begin(), log_weights.end(), c,
                                     [](const auto& e, const ClassId& k) { return e.first < k; });
    if (it == log_weights.end() || it->first != c) return -std::numeric_limits<double>::infinity();
    return it->second;
  }
};

/// A competitor given as a class path; the expert components form the
/// selection sequence it is scored by.
struct CompetitorSequence {
  std::vector<ClassId> classes;

  std::size_t size() const { return classes.size(); }
  std::size_t expert_at(std::size_t t) const { return classes[t].expert; }

  std::vector<std::size_t> experts() const {
    std::vector<std::size_t> out(classes.size());
    for (std::size_t t = 0; t < classes.size(); ++t) out[t] = classes[t].expert;
    return out;
  }

  static CompetitorSequence from_experts(std::span<const std::size_t> experts) {
    CompetitorSequence s;
    s.classes.reserve(experts.size());
    for (auto m : experts) s.classes.push_back(ClassId{m, 0});
    return s;
  }
};

inline ClassWeights init_weights(const TransitionKernel& kernel) {
  ClassWeights w;
  w.num_experts = kernel.num_experts();
  w.round = 1;
  auto prior = kernel.initial_prior();
  std::sort(prior.begin(), prior.end(), [](const auto& a, const auto& b) { return a.to < b.to; });
  for (const auto& tr : prior)
    if (tr.weight > 0.0) w.log_weights.emplace_back(tr.to, std::log(tr.weight));
  if (w.log_weights.empty()) throw Error(ErrorCode::EmptyClassSet, "initial prior has no positive mass");
  return w;
}

inline constexpr double kRateTolerance = 1e-12;

/// One round of the class recursion: exponential update with eta_prev, power
/// eta_new / eta_prev, then mixing through the kernel. The result is shifted so
/// that its largest log-weight is zero.
inline ClassWeights advance(const ClassWeights& w, std::span<const double> phi, double eta_prev,
                            double eta_new, const TransitionKernel& kernel) {
  if (phi.size() != w.num_experts)
    throw Error(ErrorCode::DimensionMismatch, "phi has " + std::to_string(phi.size()) +
                                                  " entries for " + std::to_string(w.num_experts) +
                                                  " experts");
  if (!(eta_prev > 0.0) || !(eta_new > 0.0) || !std::isfinite(eta_prev) || !std::isfinite(eta_new))
    throw Error(ErrorCode::InvalidArgument, "learning rates must be positive and finite");
  if (eta_new > eta_prev * (1.0 + kRateTolerance))
    throw Error(ErrorCode::RateIncrease, "eta_new " + std::to_string(eta_new) + " exceeds eta_prev " +
                                             std::to_string(eta_prev));
  for (std::size_t m = 0; m < phi.size(); ++m)
    if (!(phi[m] >= 0.0))
      throw Error(ErrorCode::NegativePhi, "phi[" + std::to_string(m) + "] = " + std::to_string(phi[m]));

  const double ratio = std::min(1.0, eta_new / eta_prev);
  const std::size_t t = w.round;
  const auto targets = kernel.class_set(t + 1);
  std::vector<detail::LogSumExp> acc(targets.size());

  for (const auto& [cls, lw] : w.log_weights) {
    const double scaled = ratio * (lw - eta_prev * phi[cls.expert]);
    for (const auto& tr : kernel.transition(cls, t)) {
      if (tr.weight <= 0.0) continue;
      const auto it = std::lower_bound(targets.begin(), targets.end(), tr.to);
      if (it == targets.end() || *it != tr.to)
        throw Error(ErrorCode::InvalidKernel, "transition target outside the next class set");
      acc[static_cast<std::size_t>(it - targets.begin())].add(std::log(tr.weight) + scaled);
    }
  }

  ClassWeights out;
  out.num_experts = w.num_experts;
  out.round = t + 1;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double v = acc[i].value();
    if (std::isfinite(v)) {
      out.log_weights.emplace_back(targets[i], v);
      top = std::max(top, v);
    }
  }
  if (out.log_weights.empty()) throw Error(ErrorCode::EmptyClassSet, "all class mass vanished");
  for (auto& e : out.log_weights) e.second -= top;
  return out;
}

/// Per-expert probabilities from class weights; experts without a class get 0.
inline std::vector<double> expert_marginals(const ClassWeights& w) {
  std::vector<detail::LogSumExp> per(w.num_experts);
  for (const auto& [cls, lw] : w.log_weights) per[cls.expert].add(lw);
  std::vector<double> logs(w.num_experts);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < w.num_experts; ++m) {
    logs[m] = per[m].value();
    top = std::max(top, logs[m]);
  }
  std::vector<double> p(w.num_experts, 0.0);
  double total = 0.0;
  for (std::size_t m = 0; m < w.num_experts; ++m) {
    p[m] = std::isfinite(logs[m]) ? std::exp(logs[m] - top) : 0.0;
    total += p[m];
  }
  for (auto& x : p) x /= total;
  return p;
}

/// W = log(max class-set size) - log(prior path mass), the initial prior being
/// the first factor of the path product.
inline double complexity(const TransitionKernel& kernel, const CompetitorSequence& comp) {
  if (comp.classes.empty()) throw Error(ErrorCode::LengthMismatch, "empty competitor sequence");
  const double first = kernel.prior_weight(comp.classes.front());
  if (!(first > 0.0)) throw Error(ErrorCode::ZeroTransition, "competitor starts outside the prior support");
  double log_mass = std::log(first);
  for (std::size_t i = 1; i < comp.classes.size(); ++i) {
    // Position i holds round i + 1; the transition into it leaves round i.
    const double tw = kernel.transition_weight(comp.classes[i - 1], comp.classes[i], i);
    if (!(tw > 0.0))
      throw Error(ErrorCode::ZeroTransition, "competitor leaves the kernel support at round " +
                                                 std::to_string(i + 1));
    log_mass += std::log(tw);
  }
  const double w = std::log(static_cast<double>(kernel.max_class_count(comp.classes.size()))) - log_mass;
  return std::max(0.0, w);
}

}  // namespace pmexpert

#endif  // PMEXPERT_CLASS_NETWORK_HPP
