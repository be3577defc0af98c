#pragma once

// Concrete learners and scenario worlds: the calibrated memorizer, the
// arbitrary-facts trial harness, the two-prompt trigram universe and the
// one-time-pad decryption world.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "halluc/numeric.hpp"
#include "halluc/reduction.hpp"
#include "halluc/world.hpp"

namespace halluc {

/// A learning algorithm: training data in, conditional model out. It also
/// receives the world, which honest learners use only for the public
/// structure (response sets, α_c); the oracle reads the answers.
using Learner = std::function<ConditionalModel(const World&, const TrainingSet&)>;

/// Seen prompts: p̂ = p. Unseen prompts: abstain with probability 1 - α_c,
/// otherwise uniform over the non-abstain responses (a_c included).
ConditionalModel calibrated_memorizer(const World& world, const TrainingSet& training);

/// Closed form Σ_{c ∈ U} μ(c) α_c (m_c - 1) / m_c with m_c = |R_c| - 1
/// non-abstain responses.
double memorizer_error(const World& world, const TrainingSet& training);

/// Uniform over every response of every prompt, abstain included.
ConditionalModel uniform_learner(const World& world, const TrainingSet& training);

/// Returns the training distribution itself (reads a_c from the world).
ConditionalModel oracle_learner(const World& world, const TrainingSet& training);

enum class LearnerKind : std::uint8_t { memorizer, uniform, oracle };
Learner learner_for(LearnerKind kind);
std::string to_string(LearnerKind kind);
LearnerKind parse_learner(const std::string& name);

struct ArbitraryFactsTrialConfig {
  std::size_t n_prompts = 5'000'000;
  std::uint32_t response_set_size = 366;
  double alpha = 1.0;
  std::size_t n = 1'000'000;
  std::size_t trials = 300;
  std::uint64_t seed = 0;
  /// Also evaluate δ_z at every attained probability of the learner's model.
  bool check_delta_z = false;
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  double sr = 0.0;
  double err = 0.0;
  double delta = 0.0;
  double lower_bound_rhs = 0.0;
  double upper_bound_rhs = 0.0;
  bool lower_holds = false;
  bool upper_holds = false;
  bool lower_vacuous = false;  // (35 + 6 ln N)/sqrt(N) > 1
  double max_delta_z = 0.0;    // only with check_delta_z
};

/// sr - 2/min|E_c| - (35 + 6 ln N)/sqrt(N) - δ.
double arbitrary_facts_lower_rhs(double sr, std::uint32_t min_error, std::size_t n, double delta);
/// sr - sr/(L + 1) + 13/sqrt(N), L = max|E_c|.
double arbitrary_facts_upper_rhs(double sr, std::uint32_t max_error, std::size_t n);

/// Fresh world (fresh a_c) and fresh training set per trial, the learner's
/// model, and both bound checks. Trial i uses derive_seed(config.seed, i).
std::vector<TrialOutcome> run_arbitrary_facts_trials(const ArbitraryFactsTrialConfig& config,
                                                     const Learner& learner,
                                                     Execution exec = Execution::parallel);

/// Several learners on the same trials: result[j][i] is learner j on trial i,
/// identical to a single-learner run of learner j.
std::vector<std::vector<TrialOutcome>> run_arbitrary_facts_trials(
    const ArbitraryFactsTrialConfig& config, const std::vector<Learner>& learners,
    Execution exec = Execution::parallel);

struct TrialSummary {
  std::size_t trials = 0;
  std::size_t lower_violations = 0;
  std::size_t upper_violations = 0;
  double allowed_violations = 0.0;  // binomial slack at γ = 0.01
  bool lower_pass = false;
  bool upper_pass = false;
  std::size_t vacuous_lower = 0;
  double max_delta_z = 0.0;
  double mean_sr = 0.0;
  double mean_err = 0.0;
  double min_lower_rhs = 0.0;
};

TrialSummary summarize(const std::vector<TrialOutcome>& outcomes);

/// Finite family of binary classifiers over a small universe.
class ClassifierFamily {
 public:
  using Classifier = std::function<bool(PromptId, ResponseId)>;  // true = "+"

  void add(std::string name, Classifier g);
  std::size_t size() const noexcept { return members_.size(); }
  bool evaluate(std::size_t member, PromptId c, ResponseId r) const {
    return members_[member].second(c, r);
  }
  const std::string& name(std::size_t member) const { return members_[member].first; }

 private:
  std::vector<std::pair<std::string, Classifier>> members_;
};

/// Pr_{x~D}[g(x) != f(x)] by enumeration of every cell.
double misclassification(const ClassifierFamily::Classifier& g, const IIVMixture& mixture);

struct FamilyOptimum {
  double opt = 0.0;  // min over the family
  std::size_t argmin = 0;
  std::vector<double> per_member;
};

FamilyOptimum family_optimum(const ClassifierFamily& family, const IIVMixture& mixture);

/// Two prompts sharing their last two tokens, two responses, uniform μ,
/// V_{c1} = E_{c2} = {r1}, V_{c2} = E_{c1} = {r2}.
struct TrigramUniverse {
  std::vector<std::string> prompts;
  std::vector<std::string> responses;
  std::vector<double> mu;
  Partition partition;
  ConditionalModel p;
  /// The 4 classifiers that see only the shared trigram context, i.e. are
  /// constant in the prompt.
  ClassifierFamily trigram_family;
};

TrigramUniverse trigram_world();

/// A model that cannot tell the prompts apart: p̂(r1 | c) = a for both c.
ConditionalModel trigram_model(double a);

/// One-time-pad decryption world. `message_count` is the response-set size
/// per prompt (plaintexts plus the abstain token). Prompt h asks for the
/// decryption of ciphertext h; a uniform random bijection maps ciphertexts
/// to plaintexts.
struct CryptoWorld {
  World world;
  Partition partition;
  ConditionalModel p;
  ConditionalModel uniform_baseline;
};

CryptoWorld crypto_world(std::uint32_t message_count, std::uint64_t seed);

struct DecryptionCheck {
  double err = 0.0;
  double cerr = 0.0;
  double beta = 0.0;   // advantage max(0, 1 - 2 cerr) of the thresholded classifier
  double delta = 0.0;
  double bound = 0.0;  // 1 - β - 2/min|E_c| - δ
  bool holds = false;
};

DecryptionCheck check_decryption_bound(const CryptoWorld& cw, const ConditionalModel& model);

}  // namespace halluc
