#ifndef PMEXPERT_ENVIRONMENT_HPP
#define PMEXPERT_ENVIRONMENT_HPP

// Loss and feedback generators, the game loop, and hindsight competitors.
//
// Loss sequences are realized in full from the seed before play starts
// (oblivious adversary). The learner sees them only through a LossOracle;
// competitor search reads the realized matrix directly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmexpert/class_network.hpp"
#include "pmexpert/error.hpp"
#include "pmexpert/feedback.hpp"
#include "pmexpert/learner.hpp"
#include "pmexpert/random.hpp"

namespace pmexpert {

/// Dense T x M loss table, row per round (0-based).
class LossMatrix {
 public:
  LossMatrix() = default;
  LossMatrix(std::size_t rounds, std::size_t experts, double fill = 0.0)
      : rounds_(rounds), experts_(experts), values_(rounds * experts, fill) {}

  explicit LossMatrix(const std::vector<std::vector<double>>& rows) {
    rounds_ = rows.size();
    experts_ = rows.empty() ? 0 : rows.front().size();
    values_.reserve(rounds_ * experts_);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != experts_)
        throw Error(ErrorCode::DimensionMismatch, "loss row " + std::to_string(t) + " has " +
                                                      std::to_string(rows[t].size()) + " columns, expected " +
                                                      std::to_string(experts_));
      values_.insert(values_.end(), rows[t].begin(), rows[t].end());
    }
  }

  std::size_t rounds() const { return rounds_; }
  std::size_t experts() const { return experts_; }

  double operator()(std::size_t t, std::size_t m) const { return values_[t * experts_ + m]; }
  double& operator()(std::size_t t, std::size_t m) { return values_[t * experts_ + m]; }

  std::span<const double> row(std::size_t t) const { return {values_.data() + t * experts_, experts_}; }

  friend bool operator==(const LossMatrix&, const LossMatrix&) = default;

 private:
  std::size_t rounds_ = 0;
  std::size_t experts_ = 0;
  std::vector<double> values_;
};

/// Loss range [low, high] = [B, A].
struct LossRange {
  double low = 0.0;
  double high = 1.0;

  double width() const { return high - low; }
  bool contains(double x) const { return x >= low && x <= high; }
};

class LossProcess {
 public:
  enum class Kind { scripted, iid, piecewise };

  static LossProcess scripted(LossMatrix losses, LossRange range) {
    check_range(range);
    for (std::size_t t = 0; t < losses.rounds(); ++t)
      for (std::size_t m = 0; m < losses.experts(); ++m)
        if (!range.contains(losses(t, m)))
          throw Error(ErrorCode::LossOutOfRange, "scripted loss at round " + std::to_string(t + 1) +
                                                     ", expert " + std::to_string(m + 1) + " is outside [" +
                                                     std::to_string(range.low) + ", " +
                                                     std::to_string(range.high) + "]");
    LossProcess p;
    p.kind_ = Kind::scripted;
    p.range_ = range;
    p.scripted_ = std::move(losses);
    return p;
  }

  /// Independent draws mean_m + spread * U(-1, 1), clipped to the range.
  static LossProcess iid(std::vector<double> means, double spread, LossRange range) {
    check_range(range);
    if (means.empty()) throw Error(ErrorCode::InvalidArgument, "iid losses need per-expert means");
    if (!(spread >= 0.0)) throw Error(ErrorCode::InvalidArgument, "spread must be nonnegative");
    for (double mu : means)
      if (!range.contains(mu)) throw Error(ErrorCode::LossOutOfRange, "iid mean outside the loss range");
    LossProcess p;
    p.kind_ = Kind::iid;
    p.range_ = range;
    p.means_ = std::move(means);
    p.spread_ = spread;
    return p;
  }

  /// Segments split at the given horizon fractions; inside a segment every
  /// expert has mean at the range midpoint except the segment's best expert,
  /// whose mean is lower by `gap`. Noise is spread * U(-1, 1), clipped.
  static LossProcess piecewise(std::vector<double> boundaries, std::vector<std::size_t> best_experts,
                               LossRange range, std::optional<double> gap = std::nullopt,
                               std::optional<double> spread = std::nullopt) {
    check_range(range);
    if (best_experts.size() != boundaries.size() + 1)
      throw Error(ErrorCode::DimensionMismatch, "piecewise losses need one best expert per segment");
    for (std::size_t i = 0; i < boundaries.size(); ++i) {
      if (!(boundaries[i] > 0.0 && boundaries[i] < 1.0))
        throw Error(ErrorCode::InvalidArgument, "segment boundaries are horizon fractions in (0, 1)");
      if (i > 0 && !(boundaries[i] > boundaries[i - 1]))
        throw Error(ErrorCode::InvalidArgument, "segment boundaries must increase");
    }
    LossProcess p;
    p.kind_ = Kind::piecewise;
    p.range_ = range;
    p.boundaries_ = std::move(boundaries);
    p.best_experts_ = std::move(best_experts);
    p.gap_ = gap.value_or(0.2 * range.width());
    p.spread_ = spread.value_or(0.25 * range.width());
    if (!(p.gap_ >= 0.0 && p.gap_ <= 0.5 * range.width()))
      throw Error(ErrorCode::InvalidArgument, "gap must lie in [0, (A - B) / 2]");
    return p;
  }

  Kind kind() const { return kind_; }
  const LossRange& range() const { return range_; }
  const LossMatrix& scripted_losses() const { return scripted_; }
  const std::vector<double>& boundaries() const { return boundaries_; }
  const std::vector<std::size_t>& best_experts() const { return best_experts_; }

  /// Segment index of 0-based round t in a game of the given horizon.
  std::size_t segment_of(std::size_t t, std::size_t horizon) const {
    std::size_t s = 0;
    for (double b : boundaries_)
      if (t >= static_cast<std::size_t>(std::floor(b * static_cast<double>(horizon)))) ++s;
    return s;
  }

  /// Per-round best expert of a piecewise process.
  std::vector<std::size_t> nominal_sequence(std::size_t horizon) const {
    std::vector<std::size_t> seq(horizon);
    for (std::size_t t = 0; t < horizon; ++t) seq[t] = best_experts_[segment_of(t, horizon)];
    return seq;
  }

  LossMatrix realize(std::size_t horizon, std::size_t experts, std::uint64_t seed) const {
    if (kind_ == Kind::scripted) {
      if (scripted_.experts() != experts)
        throw Error(ErrorCode::DimensionMismatch, "scripted losses have " +
                                                      std::to_string(scripted_.experts()) +
                                                      " columns for " + std::to_string(experts) + " experts");
      if (scripted_.rounds() < horizon)
        throw Error(ErrorCode::DimensionMismatch, "scripted losses cover only " +
                                                      std::to_string(scripted_.rounds()) + " rounds");
      LossMatrix out(horizon, experts);
      for (std::size_t t = 0; t < horizon; ++t)
        for (std::size_t m = 0; m < experts; ++m) out(t, m) = scripted_(t, m);
      return out;
    }
    Rng rng(seed, kLossStream);
    LossMatrix out(horizon, experts);
    if (kind_ == Kind::iid) {
      if (means_.size() != experts)
        throw Error(ErrorCode::DimensionMismatch, "iid means do not match the expert count");
      for (std::size_t t = 0; t < horizon; ++t)
        for (std::size_t m = 0; m < experts; ++m) out(t, m) = draw(means_[m], rng);
      return out;
    }
    for (auto b : best_experts_)
      if (b >= experts) throw Error(ErrorCode::DimensionMismatch, "segment best expert out of range");
    const double mid = range_.low + 0.5 * range_.width();
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t best = best_experts_[segment_of(t, horizon)];
      for (std::size_t m = 0; m < experts; ++m) out(t, m) = draw(m == best ? mid - gap_ : mid, rng);
    }
    return out;
  }

 private:
  static void check_range(const LossRange& r) {
    if (!(r.low < r.high)) throw Error(ErrorCode::InvalidArgument, "loss range needs B < A");
  }

  double draw(double mean, Rng& rng) const {
    const double x = mean + spread_ * (2.0 * rng.uniform() - 1.0);
    return std::clamp(x, range_.low, range_.high);
  }

  Kind kind_ = Kind::scripted;
  LossRange range_;
  LossMatrix scripted_;
  std::vector<double> means_;
  double spread_ = 0.0;
  std::vector<double> boundaries_;
  std::vector<std::size_t> best_experts_;
  double gap_ = 0.0;
};

class FeedbackProcess {
 public:
  enum class Kind { constant, scripted, full };

  static FeedbackProcess constant(FeedbackMatrix matrix) {
    validate(matrix);
    FeedbackProcess f;
    f.kind_ = matrix.mode() == FeedbackMode::full ? Kind::full : Kind::constant;
    f.matrices_ = {std::move(matrix)};
    return f;
  }

  static FeedbackProcess full(std::size_t experts) {
    FeedbackProcess f;
    f.kind_ = Kind::full;
    f.matrices_ = {FeedbackMatrix::full(experts)};
    return f;
  }

  /// Round t uses matrices[t - 1]; the last matrix repeats.
  static FeedbackProcess scripted(std::vector<FeedbackMatrix> matrices) {
    if (matrices.empty()) throw Error(ErrorCode::InvalidArgument, "empty feedback script");
    for (std::size_t i = 0; i < matrices.size(); ++i) {
      if (matrices[i].size() != matrices.front().size())
        throw Error(ErrorCode::DimensionMismatch, "feedback script mixes matrix sizes");
      try {
        validate(matrices[i]);
      } catch (const Error& e) {
        throw Error(e.code(), "feedback matrix " + std::to_string(i) + ": " + e.what());
      }
    }
    FeedbackProcess f;
    f.kind_ = Kind::scripted;
    f.matrices_ = std::move(matrices);
    return f;
  }

  Kind kind() const { return kind_; }
  std::size_t experts() const { return matrices_.front().size(); }

  const FeedbackMatrix& matrix_at(std::size_t t) const {
    return matrices_[std::min(t, matrices_.size()) - 1];
  }

 private:
  Kind kind_ = Kind::constant;
  std::vector<FeedbackMatrix> matrices_;
};

struct GameTranscript {
  std::vector<RoundRecord> records;
  double cumulative_loss = 0.0;
  LearnerConfig config;
  std::uint64_t seed = 0;
  std::size_t loss_queries = 0;
  std::size_t observed_count = 0;

  std::vector<std::size_t> selections() const {
    std::vector<std::size_t> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out[i] = records[i].selected;
    return out;
  }
};

/// Plays `horizon` rounds against a realized loss matrix.
inline GameTranscript run_game(const LearnerConfig& cfg, const LossMatrix& losses,
                               const FeedbackProcess& feedback, std::size_t horizon, std::uint64_t seed) {
  if (horizon == 0) throw Error(ErrorCode::InvalidArgument, "horizon must be at least 1");
  if (losses.rounds() < horizon || losses.experts() != cfg.num_experts)
    throw Error(ErrorCode::DimensionMismatch, "loss matrix does not cover the game");
  if (feedback.experts() != cfg.num_experts)
    throw Error(ErrorCode::DimensionMismatch, "feedback process does not match the expert count");

  GameTranscript tr;
  tr.config = cfg;
  tr.seed = seed;
  tr.records.reserve(horizon);
  Rng rng(seed, kLearnerStream);
  LearnerState state = initial_state(cfg);
  for (std::size_t t = 1; t <= horizon; ++t) {
    LossOracle oracle(losses.row(t - 1));
    auto [rec, next] = step(state, cfg, feedback.matrix_at(t), oracle, rng);
    tr.loss_queries += oracle.queries();
    tr.observed_count += rec.outcome.observed_losses.size();
    rec.selected_loss = losses(t - 1, rec.selected);
    tr.cumulative_loss += rec.selected_loss;
    tr.records.push_back(std::move(rec));
    state = std::move(next);
  }
  return tr;
}

inline GameTranscript run_game(const LearnerConfig& cfg, const LossProcess& process,
                               const FeedbackProcess& feedback, std::size_t horizon, std::uint64_t seed) {
  return run_game(cfg, process.realize(horizon, cfg.num_experts, seed), feedback, horizon, seed);
}

inline double sequence_loss(const LossMatrix& losses, const CompetitorSequence& comp) {
  if (comp.size() > losses.rounds()) throw Error(ErrorCode::LengthMismatch, "competitor longer than game");
  double total = 0.0;
  for (std::size_t t = 0; t < comp.size(); ++t) total += losses(t, comp.expert_at(t));
  return total;
}

inline std::size_t switch_count(const CompetitorSequence& comp) {
  std::size_t k = 0;
  for (std::size_t t = 1; t < comp.size(); ++t) k += comp.expert_at(t) != comp.expert_at(t - 1);
  return k;
}

/// Loss-minimizing class path with at most `max_switches` expert changes,
/// restricted to the kernel's support. Ties go to the smaller class.
inline CompetitorSequence best_competitor(const LossMatrix& losses, const TransitionKernel& kernel,
                                          std::size_t max_switches) {
  const std::size_t horizon = losses.rounds();
  if (horizon == 0) return {};
  const std::size_t k = std::min(max_switches, horizon - 1);
  const std::size_t layers = k + 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::vector<std::vector<ClassId>> classes(horizon);
  for (std::size_t t = 0; t < horizon; ++t) classes[t] = kernel.class_set(t + 1);

  // back[t][c * layers + s] = (previous class index, previous switch count)
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> back(horizon);
  std::vector<double> cost(classes[0].size() * layers, kInf);
  for (std::size_t c = 0; c < classes[0].size(); ++c)
    if (kernel.prior_weight(classes[0][c]) > 0.0) cost[c * layers] = losses(0, classes[0][c].expert);
  back[0].assign(cost.size(), {kNone, kNone});

  for (std::size_t t = 1; t < horizon; ++t) {
    const auto& prev = classes[t - 1];
    const auto& cur = classes[t];
    std::vector<double> next(cur.size() * layers, kInf);
    back[t].assign(next.size(), {kNone, kNone});
    for (std::size_t a = 0; a < prev.size(); ++a) {
      bool live = false;
      for (std::size_t s = 0; s < layers; ++s) live = live || cost[a * layers + s] < kInf;
      if (!live) continue;
      for (const auto& tr : kernel.transition(prev[a], t)) {
        if (!(tr.weight > 0.0)) continue;
        const auto it = std::lower_bound(cur.begin(), cur.end(), tr.to);
        if (it == cur.end() || *it != tr.to) continue;
        const std::size_t b = static_cast<std::size_t>(it - cur.begin());
        const std::size_t extra = prev[a].expert != cur[b].expert ? 1 : 0;
        const double l = losses(t, cur[b].expert);
        for (std::size_t s = 0; s + extra < layers; ++s) {
          const double c = cost[a * layers + s];
          if (!(c < kInf)) continue;
          auto& slot = next[b * layers + s + extra];
          if (c + l < slot) {
            slot = c + l;
            back[t][b * layers + s + extra] = {a, s};
          }
        }
      }
    }
    cost = std::move(next);
  }

  std::size_t best = kNone;
  for (std::size_t i = 0; i < cost.size(); ++i)
    if (cost[i] < kInf && (best == kNone || cost[i] < cost[best])) best = i;
  if (best == kNone) throw Error(ErrorCode::ZeroTransition, "kernel support admits no competitor");

  CompetitorSequence out;
  out.classes.resize(horizon);
  std::size_t c = best / layers, s = best % layers;
  for (std::size_t t = horizon; t-- > 0;) {
    out.classes[t] = classes[t][c];
    const auto [pc, ps] = back[t][c * layers + s];
    c = pc;
    s = ps;
  }
  return out;
}

}  // namespace pmexpert

#endif  // PMEXPERT_ENVIRONMENT_HPP
