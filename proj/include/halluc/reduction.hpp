#pragma once

// Generative error rate, the Is-It-Valid (IIV) mixture, thresholded-model
// classifiers, calibration gaps, the main error/misclassification bound,
// cross-entropy and the positive-set rescaling identity.
//
// Every quantity is an exact compensated sum over the universe. Minimum error
// and maximum valid counts range over prompts with μ(c) > 0.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "halluc/world.hpp"

namespace halluc {

struct PartitionStats {
  std::uint32_t min_error = 0;  // min_c |E_c| over μ(c) > 0
  std::uint32_t max_error = 0;  // max_c |E_c| over μ(c) > 0
  std::uint32_t max_valid = 0;  // max_c |V_c| over μ(c) > 0
  std::uint32_t min_valid = 0;
};

PartitionStats partition_stats(const Partition& partition, std::span<const double> mu);

/// 1 / min_c |E_c|.
double default_threshold(const Partition& partition, std::span<const double> mu);

/// D: with probability 1/2 a draw (c, r) ~ p, otherwise c ~ μ and r uniform
/// over E_c. Target f(c, r) = + iff r ∈ V_c. Keeps references to its inputs.
class IIVMixture {
 public:
  IIVMixture(const ConditionalModel& p, const Partition& partition, std::span<const double> mu);

  double prob(PromptId c, ResponseId r) const;
  bool positive(PromptId c, ResponseId r) const { return partition_->is_valid(c, r); }
  /// Σ_x D(x); 1 up to rounding when p(V) = 1.
  double total() const;

  const ConditionalModel& p() const noexcept { return *p_; }
  const Partition& partition() const noexcept { return *partition_; }
  std::span<const double> mu() const noexcept { return mu_; }
  const PartitionStats& stats() const noexcept { return stats_; }

 private:
  const ConditionalModel* p_;
  const Partition* partition_;
  std::span<const double> mu_;
  PartitionStats stats_;
};

/// err = Σ_{(c,r) ∈ E} μ(c) p̂(r | c).
double error_rate(const ConditionalModel& model, const Partition& partition,
                  std::span<const double> mu);

/// Pr_{x~D}[f̂(x) != f(x)] with f̂(c, r) = + iff p̂(r | c) > threshold.
/// Threshold defaults to 1 / min_c |E_c|.
double iiv_misclassification(const ConditionalModel& model, const IIVMixture& mixture,
                             std::optional<double> threshold = std::nullopt);

/// Expected misclassification over a uniformly random threshold t ∈ [0,1];
/// uses Pr_t[p̂(r|c) > t] = p̂(r|c).
double expected_misclassification_uniform_threshold(const ConditionalModel& model,
                                                    const IIVMixture& mixture);

/// |p̂(A) - p(A)| for A = {(c, r) : p̂(r | c) > threshold}.
double delta_calibration(const ConditionalModel& model, const ConditionalModel& p,
                         std::span<const double> mu, double threshold);

/// delta_calibration at each threshold, in one pass over the universe.
std::vector<double> delta_profile(const ConditionalModel& model, const ConditionalModel& p,
                                  std::span<const double> mu, std::span<const double> thresholds);

/// Distinct probability values the model assigns to at least one cell, plus
/// 0 and 1, sorted. Every piecewise-constant-in-t quantity defined through
/// "p̂ > t" is determined by its values at these points.
std::vector<double> attained_probabilities(const ConditionalModel& model);

struct BoundReport {
  double err = 0.0;
  double cerr = 0.0;
  double ratio_term = 0.0;  // max_c |V_c| / min_c |E_c|
  double delta = 0.0;
  double threshold = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;  // 2 cerr - ratio_term - delta
  bool holds = false;
};

class NoisyTrainingDistribution : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// err >= 2 cerr - max|V_c|/min|E_c| - δ for a noiseless p (p(E) = 0).
/// Throws NoisyTrainingDistribution when p(E) > 1e-12.
BoundReport check_main_bound(const ConditionalModel& p, const ConditionalModel& model,
                             const Partition& partition, std::span<const double> mu);

/// A cell with positive reference probability but zero model probability.
class SupportViolation : public InvalidInput {
 public:
  SupportViolation(PromptId c, ResponseId r);
  PromptId prompt;
  ResponseId response;
};

/// Σ_c μ(c) Σ_r p(r|c) (-log p̂(r|c)).
double cross_entropy(const ConditionalModel& model, const ConditionalModel& p,
                     std::span<const double> mu);

/// Cells with p̂ > threshold are multiplied by s, then each row is renormalized.
ConditionalModel rescaled_model(const ConditionalModel& model, double s, double threshold);

struct DerivativeReport {
  double delta = 0.0;
  double finite_difference = 0.0;  // dL(p̂_s)/ds at s = 1, central difference
  double analytic_derivative = 0.0;  // p̂(A) - p(A)
  bool agree = false;  // | |fd| - δ | <= 1e-6
};

inline constexpr double kDerivativeStep = 1e-5;
inline constexpr double kDerivativeTolerance = 1e-6;

DerivativeReport delta_derivative_check(const ConditionalModel& model, const ConditionalModel& p,
                                        std::span<const double> mu, double threshold);

struct MultipleChoiceReport {
  double err = 0.0;
  std::uint32_t choices = 0;          // C = min |E_c| + 1
  double best_t = 0.0;                // threshold minimizing cerr(f̂_t)
  double cerr_at_best_t = 0.0;
  double max_cerr = 0.0;              // largest cerr(f̂_t) over the sweep
  double expected_cerr = 0.0;         // E_{t~U[0,1]} cerr(f̂_t)
  double factor = 0.0;                // 2 (1 - 1/C)
  bool holds = false;                 // err >= factor * cerr_at_best_t
  double expectation_identity_gap = 0.0;  // ½(1/(C-1) + 1) err - E_t cerr
};

/// Pure multiple choice (|V_c| = 1 for every prompt).
MultipleChoiceReport multiple_choice_bound(const ConditionalModel& model,
                                           const ConditionalModel& p,
                                           const Partition& partition,
                                           std::span<const double> mu);

/// cerr(f̂_t) at many thresholds in one pass.
std::vector<double> misclassification_profile(const ConditionalModel& model,
                                              const IIVMixture& mixture,
                                              std::span<const double> thresholds);

}  // namespace halluc
