#ifndef PMEXPERT_FEEDBACK_HPP
#define PMEXPERT_FEEDBACK_HPP

// Partial-monitoring feedback schemes.
//
// A feedback matrix P holds, at (m, m'), the probability that the loss of
// expert m is revealed when expert m' is selected. Indices are 0-based.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmexpert/error.hpp"
#include "pmexpert/random.hpp"

namespace pmexpert {

enum class FeedbackMode { strict, full };

inline constexpr double kRowSumTolerance = 1e-9;
inline constexpr double kProbabilityTolerance = 1e-9;

class FeedbackMatrix {
 public:
  FeedbackMatrix() = default;

  /// Row-major construction; rows are indexed by the observed expert.
  FeedbackMatrix(std::vector<std::vector<double>> rows, FeedbackMode mode) : mode_(mode) {
    size_ = rows.size();
    entries_.reserve(size_ * size_);
    for (std::size_t m = 0; m < rows.size(); ++m) {
      if (rows[m].size() != size_)
        throw Error(ErrorCode::DimensionMismatch,
                    "feedback matrix row " + std::to_string(m) + " has " +
                        std::to_string(rows[m].size()) + " entries, expected " +
                        std::to_string(size_));
      entries_.insert(entries_.end(), rows[m].begin(), rows[m].end());
    }
  }

  /// Classic bandit feedback: only the selected expert is observed.
  static FeedbackMatrix bandit(std::size_t num_experts) {
    FeedbackMatrix f;
    f.size_ = num_experts;
    f.entries_.assign(num_experts * num_experts, 0.0);
    for (std::size_t m = 0; m < num_experts; ++m) f.entries_[m * num_experts + m] = 1.0;
    return f;
  }

  static FeedbackMatrix full(std::size_t num_experts) {
    FeedbackMatrix f;
    f.size_ = num_experts;
    f.mode_ = FeedbackMode::full;
    f.entries_.assign(num_experts * num_experts, 1.0);
    return f;
  }

  std::size_t size() const noexcept { return size_; }
  FeedbackMode mode() const noexcept { return mode_; }

  double operator()(std::size_t observed, std::size_t selected) const {
    return entries_[observed * size_ + selected];
  }

  std::span<const double> row(std::size_t observed) const {
    return {entries_.data() + observed * size_, size_};
  }

  friend bool operator==(const FeedbackMatrix&, const FeedbackMatrix&) = default;

 private:
  std::size_t size_ = 0;
  FeedbackMode mode_ = FeedbackMode::strict;
  std::vector<double> entries_;
};

/// Indicators plus the losses revealed for indicator-1 experts.
struct ObservationOutcome {
  std::vector<std::uint8_t> indicators;
  std::map<std::size_t, double> observed_losses;

  bool observed(std::size_t m) const { return indicators[m] != 0; }
};

/// Throws unless the matrix satisfies the invariants of its mode.
inline void validate(const FeedbackMatrix& matrix) {
  const std::size_t n = matrix.size();
  if (n == 0) throw Error(ErrorCode::DimensionMismatch, "feedback matrix is empty");
  for (std::size_t m = 0; m < n; ++m) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double v = matrix(m, k);
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorCode::EntryOutOfRange, "entry (" + std::to_string(m) + ", " +
                                                    std::to_string(k) + ") = " +
                                                    std::to_string(v) + " is outside [0, 1]");
      if (matrix.mode() == FeedbackMode::full && v != 1.0)
        throw Error(ErrorCode::EntryOutOfRange, "full feedback requires every entry to be 1, entry (" +
                                                    std::to_string(m) + ", " + std::to_string(k) +
                                                    ") = " + std::to_string(v));
      sum += v;
    }
    if (matrix.mode() == FeedbackMode::strict && sum < 1.0 - kRowSumTolerance)
      throw Error(ErrorCode::RowSumDeficient,
                  "row " + std::to_string(m) + " sums to " + std::to_string(sum) + " < 1");
  }
}

inline void check_probability_vector(std::span<const double> q, std::string_view what) {
  double sum = 0.0;
  for (double x : q) {
    if (!(x >= 0.0)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " has a negative entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance)
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + " sums to " + std::to_string(sum) + ", not 1");
}

/// o_m = sum_k P(m, k) q_k, the marginal chance that expert m is observed.
inline std::vector<double> observation_probabilities(const FeedbackMatrix& matrix,
                                                     std::span<const double> q) {
  if (q.size() != matrix.size())
    throw Error(ErrorCode::DimensionMismatch, "selection vector has " + std::to_string(q.size()) +
                                                  " entries, feedback matrix is " +
                                                  std::to_string(matrix.size()) + " wide");
  check_probability_vector(q, "selection vector");
  std::vector<double> o(q.size(), 0.0);
  for (std::size_t m = 0; m < q.size(); ++m) {
    const auto row = matrix.row(m);
    double acc = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) acc += row[k] * q[k];
    o[m] = acc;
  }
  return o;
}

/// Draws independent Bernoulli(P(m, selected)) indicators in index order and
/// reads the loss source only at revealed indices. `loss_of` is any callable
/// mapping an expert index to its loss.
template <typename LossSource>
ObservationOutcome sample_observations(const FeedbackMatrix& matrix, std::size_t selected,
                                       LossSource&& loss_of, Rng& rng) {
  if (selected >= matrix.size())
    throw Error(ErrorCode::InvalidArgument, "selected expert " + std::to_string(selected) +
                                                " out of range");
  ObservationOutcome out;
  out.indicators.assign(matrix.size(), 0);
  for (std::size_t m = 0; m < matrix.size(); ++m) {
    if (rng.bernoulli(matrix(m, selected))) {
      out.indicators[m] = 1;
      out.observed_losses.emplace(m, loss_of(m));
    }
  }
  return out;
}

inline ObservationOutcome sample_observations(const FeedbackMatrix& matrix, std::size_t selected,
                                              std::span<const double> losses, Rng& rng) {
  if (losses.size() != matrix.size())
    throw Error(ErrorCode::DimensionMismatch, "loss vector does not match feedback matrix");
  return sample_observations(matrix, selected, [losses](std::size_t m) { return losses[m]; }, rng);
}

}  // namespace pmexpert

#endif  // PMEXPERT_FEEDBACK_HPP
