#pragma once

// Confidence-target grading: scoring pre-judged evaluation records, optimal
// answer/abstain policies under a posterior, model comparisons and the
// behavioral-calibration audit.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "halluc/world.hpp"

namespace halluc {

struct EvalRecord {
  std::string item_id;
  bool abstain = false;
  std::optional<bool> correct;  // present iff !abstain
  std::optional<double> confidence;

  bool operator==(const EvalRecord&) const = default;
};

class RecordError : public InvalidInput {
 public:
  RecordError(std::size_t line, std::string item_id, const std::string& message);
  std::size_t line;  // 1-based; 0 when not parsed from a file
  std::string item_id;
};

void validate(const EvalRecord& record, std::size_t line = 0);

/// One record per line; blank lines are skipped, unknown fields ignored.
std::vector<EvalRecord> parse_records(std::istream& in);
std::vector<EvalRecord> parse_records_file(const std::string& path);

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

/// Smallest-denominator continued-fraction convergent within `tolerance` of x
/// with denominator at most `max_den`.
std::optional<Rational> rational_approximation(double x, std::int64_t max_den = 1'000'000,
                                               double tolerance = 1e-12);

class GraderConfig {
 public:
  /// Target t ∈ [0, 1); wrong answers cost t/(1-t).
  static GraderConfig with_target(double t);
  /// "binary" (0), "0.5", "0.75", "0.9".
  static GraderConfig preset(const std::string& name);
  static const std::vector<std::string>& preset_names();

  double target() const noexcept { return target_; }
  /// t/(1-t), computed from the exact rational form of t when one exists.
  double penalty() const noexcept { return penalty_; }
  const std::optional<std::string>& preset_name() const noexcept { return preset_; }

 private:
  double target_ = 0.0;
  double penalty_ = 0.0;
  std::optional<std::string> preset_;
};

struct ScoreReport {
  double target = 0.0;
  double penalty = 0.0;
  std::size_t n_items = 0;
  std::size_t n_abstained = 0;
  std::size_t n_correct = 0;
  std::size_t n_wrong = 0;
  double total_score = 0.0;  // n_correct - penalty * n_wrong
  double mean_score = 0.0;   // 0 when n_items = 0
  std::optional<double> accuracy_among_answered;
};

ScoreReport score(const std::vector<EvalRecord>& records, const GraderConfig& config);

/// Per item, the probability that each candidate response is the correct one.
struct BeliefProfile {
  std::vector<std::vector<double>> items;
  void validate() const;
};

struct Decision {
  bool answer = false;
  std::size_t response = 0;  // argmax candidate, lowest index on ties
  double confidence = 0.0;
  double expected_score = 0.0;  // of the chosen action
};

struct PolicyResult {
  std::vector<Decision> decisions;
  double expected_total = 0.0;
  std::size_t abstentions = 0;
};

/// Answers with the most likely candidate iff its probability exceeds t.
PolicyResult optimal_policy(const BeliefProfile& beliefs, const GraderConfig& config);

/// q - (1 - q) * penalty.
double expected_answer_score(double confidence, const GraderConfig& config);

struct MisalignedRow {
  std::uint64_t seed = 0;
  std::size_t candidates = 0;
  double confidence = 0.0;  // of the best candidate
  bool answered = false;
};

struct MisalignedReport {
  std::size_t trials = 0;
  std::size_t items = 0;
  std::size_t violations = 0;  // abstentions chosen at t = 0
  bool pass = false;
  std::vector<MisalignedRow> rows;  // by trial index
};

/// Random profiles (2-10 candidates, random simplex points) at t = 0.
MisalignedReport verify_observation_misaligned(std::size_t trials, std::uint64_t seed);

/// Random profile used by the misaligned suite; exposed for tests.
BeliefProfile random_belief_profile(std::uint64_t seed, std::size_t items = 1);

struct ComparisonReport {
  double score_a = 0.0;  // abstains when confidence < threshold_a
  double score_b = 0.0;  // always guesses
  bool b_beats_a = false;
  std::size_t a_abstentions = 0;
};

ComparisonReport compare_models(const BeliefProfile& beliefs, double threshold_a,
                                const GraderConfig& config);

struct AuditConfig {
  /// Hoeffding failure probability for the finite-sample slack.
  double slack_failure_probability = 0.05;
  bool finite_sample_slack = true;
};

struct AuditRow {
  double target = 0.0;
  std::size_t n_records = 0;
  std::size_t n_answered = 0;
  std::optional<double> answered_fraction;        // undefined for an empty run
  std::optional<double> accuracy_among_answered;  // undefined when nothing answered
  double slack = 0.0;
  bool calibrated_at_t = false;
  bool vacuous = false;  // nothing answered
  bool undefined = false;  // empty run
  bool monotone_ok = true;  // answered_fraction <= that of the previous defined target
};

struct AuditReport {
  std::vector<AuditRow> rows;  // ascending target
  bool monotone = true;
  bool all_calibrated = true;
};

AuditReport behavioral_calibration_audit(const std::map<double, std::vector<EvalRecord>>& runs,
                                         const AuditConfig& config = {});

}  // namespace halluc
