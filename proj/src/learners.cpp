#include "halluc/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "halluc/estimators.hpp"
#include "halluc/rng.hpp"

namespace halluc {

namespace {

constexpr ResponseId kUnseen = ~ResponseId{0};

// The answer memorized for each prompt, or kUnseen.
std::vector<ResponseId> memorized_answers(const World& world, const TrainingSet& training) {
  std::vector<ResponseId> seen(world.prompts(), kUnseen);
  for (const auto& pair : training.pairs) {
    if (pair.prompt >= world.prompts()) {
      throw InvalidInput("training pair references an unknown prompt");
    }
    if (pair.response != world.abstain_token) seen[pair.prompt] = pair.response;
  }
  return seen;
}

}  // namespace

ConditionalModel calibrated_memorizer(const World& world, const TrainingSet& training) {
  const auto seen = memorized_answers(world, training);
  const ResponseId idk = world.abstain_token;
  ConditionalModel::Builder b(world.prompts());
  for (std::size_t c = 0; c < world.prompts(); ++c) {
    const std::uint32_t k = world.response_count[c];
    const double a = world.alpha[c];
    if (seen[c] != kUnseen) {
      b.row(k, 0.0, {{idk, 1.0 - a}, {seen[c], a}});
    } else {
      // The abstain cell stays explicit even at α = 1 so the fill never lands on it.
      b.row(k, a / static_cast<double>(k - 1), {{idk, 1.0 - a}});
    }
  }
  return std::move(b).build();
}

double memorizer_error(const World& world, const TrainingSet& training) {
  const auto seen = memorized_answers(world, training);
  CompensatedSum s;
  for (std::size_t c = 0; c < world.prompts(); ++c) {
    if (seen[c] != kUnseen) continue;
    const double m = static_cast<double>(world.response_count[c] - 1);
    s.add(world.mu[c] * (world.alpha[c] / m) * (m - 1.0));
  }
  return s.value();
}

ConditionalModel uniform_learner(const World& world, const TrainingSet&) {
  return ConditionalModel::uniform(world.response_count);
}

ConditionalModel oracle_learner(const World& world, const TrainingSet&) {
  return training_distribution(world);
}

Learner learner_for(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::memorizer:
      return calibrated_memorizer;
    case LearnerKind::uniform:
      return uniform_learner;
    case LearnerKind::oracle:
      return oracle_learner;
  }
  throw InvalidInput("unknown learner");
}

std::string to_string(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::memorizer:
      return "memorizer";
    case LearnerKind::uniform:
      return "uniform";
    case LearnerKind::oracle:
      return "oracle";
  }
  return "unknown";
}

LearnerKind parse_learner(const std::string& name) {
  if (name == "memorizer") return LearnerKind::memorizer;
  if (name == "uniform") return LearnerKind::uniform;
  if (name == "oracle") return LearnerKind::oracle;
  throw InvalidInput("unknown learner '" + name + "' (expected memorizer, uniform or oracle)");
}

double arbitrary_facts_lower_rhs(double sr, std::uint32_t min_error, std::size_t n,
                                 double delta) {
  const double dn = static_cast<double>(n);
  return sr - 2.0 / static_cast<double>(min_error) - (35.0 + 6.0 * std::log(dn)) / std::sqrt(dn) -
         delta;
}

double arbitrary_facts_upper_rhs(double sr, std::uint32_t max_error, std::size_t n) {
  return sr - sr / (static_cast<double>(max_error) + 1.0) +
         13.0 / std::sqrt(static_cast<double>(n));
}

std::vector<TrialOutcome> run_arbitrary_facts_trials(const ArbitraryFactsTrialConfig& config,
                                                     const Learner& learner, Execution exec) {
  return std::move(run_arbitrary_facts_trials(config, std::vector<Learner>{learner}, exec).front());
}

std::vector<std::vector<TrialOutcome>> run_arbitrary_facts_trials(
    const ArbitraryFactsTrialConfig& config, const std::vector<Learner>& learners,
    Execution exec) {
  if (config.trials < 100) throw InvalidInput("trials must be at least 100");
  if (config.n == 0) throw InvalidInput("N must be positive");
  if (config.response_set_size < 3) throw InvalidInput("response_set_size must be at least 3");
  if (learners.empty()) throw InvalidInput("no learner given");
  std::vector<std::vector<TrialOutcome>> out(learners.size(),
                                             std::vector<TrialOutcome>(config.trials));
  const double dn = static_cast<double>(config.n);
  const bool vacuous = (35.0 + 6.0 * std::log(dn)) / std::sqrt(dn) > 1.0;
  for_each_index(
      config.trials,
      [&](std::size_t i) {
        const std::uint64_t ts = derive_seed(config.seed, i);
        ArbitraryFactsSpec spec;
        spec.n_prompts = config.n_prompts;
        spec.response_set_size = config.response_set_size;
        spec.alpha = config.alpha;
        spec.seed = derive_seed(ts, 0);
        const World world = build_arbitrary_facts(spec);
        const TrainingSet training = sample_training(world, config.n, derive_seed(ts, 1));
        const Partition partition = truth_partition(world);
        const ConditionalModel p = training_distribution(world);
        const PartitionStats stats = partition_stats(partition, world.mu);
        const double sr = singleton_rate(training, world.abstain_token).rate;
        const double t = 1.0 / static_cast<double>(stats.min_error);

        for (std::size_t j = 0; j < learners.size(); ++j) {
          const ConditionalModel model = learners[j](world, training);
          TrialOutcome& o = out[j][i];
          o.seed = ts;
          o.sr = sr;
          o.err = error_rate(model, partition, world.mu);
          if (config.check_delta_z) {
            auto zs = attained_probabilities(model);
            zs.push_back(t);
            const auto d = delta_profile(model, p, world.mu, zs);
            o.delta = d.back();
            o.max_delta_z = *std::max_element(d.begin(), d.end());
          } else {
            o.delta = delta_calibration(model, p, world.mu, t);
          }
          o.lower_bound_rhs = arbitrary_facts_lower_rhs(sr, stats.min_error, config.n, o.delta);
          o.upper_bound_rhs = arbitrary_facts_upper_rhs(sr, stats.max_error, config.n);
          o.lower_holds = o.err >= o.lower_bound_rhs - kCompareTolerance;
          o.upper_holds = o.err <= o.upper_bound_rhs + kCompareTolerance;
          o.lower_vacuous = vacuous;
        }
      },
      exec);
  return out;
}

TrialSummary summarize(const std::vector<TrialOutcome>& outcomes) {
  TrialSummary s;
  s.trials = outcomes.size();
  if (outcomes.empty()) return s;
  CompensatedSum sr, err;
  s.min_lower_rhs = outcomes.front().lower_bound_rhs;
  for (const auto& o : outcomes) {
    s.lower_violations += o.lower_holds ? 0 : 1;
    s.upper_violations += o.upper_holds ? 0 : 1;
    s.vacuous_lower += o.lower_vacuous ? 1 : 0;
    s.max_delta_z = std::max(s.max_delta_z, o.max_delta_z);
    s.min_lower_rhs = std::min(s.min_lower_rhs, o.lower_bound_rhs);
    sr.add(o.sr);
    err.add(o.err);
  }
  const double n = static_cast<double>(s.trials);
  s.mean_sr = sr.value() / n;
  s.mean_err = err.value() / n;
  s.allowed_violations = binomial_violation_limit(s.trials, 0.01);
  s.lower_pass = within_binomial_slack(s.lower_violations, s.trials, 0.01);
  s.upper_pass = within_binomial_slack(s.upper_violations, s.trials, 0.01);
  return s;
}

void ClassifierFamily::add(std::string name, Classifier g) {
  if (!g) throw InvalidInput("classifier must be callable");
  members_.emplace_back(std::move(name), std::move(g));
}

double misclassification(const ClassifierFamily::Classifier& g, const IIVMixture& mixture) {
  CompensatedSum s;
  const Partition& part = mixture.partition();
  for (std::size_t c = 0; c < part.prompts(); ++c) {
    const auto pc = static_cast<PromptId>(c);
    for (ResponseId r = 0; r < part.responses(pc); ++r) {
      if (g(pc, r) != mixture.positive(pc, r)) s.add(mixture.prob(pc, r));
    }
  }
  return s.value();
}

FamilyOptimum family_optimum(const ClassifierFamily& family, const IIVMixture& mixture) {
  if (family.size() == 0) throw InvalidInput("classifier family is empty");
  FamilyOptimum best;
  best.per_member.reserve(family.size());
  for (std::size_t m = 0; m < family.size(); ++m) {
    const double e = misclassification(
        [&](PromptId c, ResponseId r) { return family.evaluate(m, c, r); }, mixture);
    best.per_member.push_back(e);
    if (m == 0 || e < best.opt) {
      best.opt = e;
      best.argmin = m;
    }
  }
  return best;
}

TrigramUniverse trigram_world() {
  TrigramUniverse u;
  u.prompts = {"She lost it and was completely out of", "He lost it and was completely out of"};
  u.responses = {"her mind.", "his mind."};
  u.mu = {0.5, 0.5};
  Partition::Builder pb(2);
  pb.row(2, {0});
  pb.row(2, {1});
  u.partition = std::move(pb).build();
  u.p = ConditionalModel::dense({{1.0, 0.0}, {0.0, 1.0}});
  // Both prompts end in "out of": the classifier only sees the response.
  for (int bits = 0; bits < 4; ++bits) {
    const bool plus_r1 = bits & 1;
    const bool plus_r2 = bits & 2;
    std::string name = std::string("r1") + (plus_r1 ? "+" : "-") + ",r2" + (plus_r2 ? "+" : "-");
    u.trigram_family.add(std::move(name), [plus_r1, plus_r2](PromptId, ResponseId r) {
      return r == 0 ? plus_r1 : plus_r2;
    });
  }
  return u;
}

ConditionalModel trigram_model(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("trigram model probability must lie in [0, 1]");
  return ConditionalModel::dense({{a, 1.0 - a}, {a, 1.0 - a}});
}

CryptoWorld crypto_world(std::uint32_t message_count, std::uint64_t seed) {
  if (message_count < 3) throw InvalidInput("message_count must be at least 3");
  const std::uint32_t messages = message_count - 1;
  Rng rng(seed);
  std::vector<ResponseId> plaintext(messages);
  std::iota(plaintext.begin(), plaintext.end(), ResponseId{1});
  for (std::uint32_t i = messages; i > 1; --i) {
    const auto j = static_cast<std::uint32_t>(rng.below(i));
    std::swap(plaintext[i - 1], plaintext[j]);
  }
  CryptoWorld cw;
  World& w = cw.world;
  w.mu.assign(messages, 1.0 / static_cast<double>(messages));
  w.response_count.assign(messages, message_count);
  w.abstain_token = 0;
  w.alpha.assign(messages, 1.0);
  w.answer = std::move(plaintext);
  w.validate();
  cw.partition = truth_partition(w);
  cw.p = training_distribution(w);
  cw.uniform_baseline = ConditionalModel::uniform(w.response_count);
  return cw;
}

DecryptionCheck check_decryption_bound(const CryptoWorld& cw, const ConditionalModel& model) {
  require_same_universe(model, cw.partition, cw.world.mu);
  const IIVMixture mixture(cw.p, cw.partition, cw.world.mu);
  const double t = 1.0 / static_cast<double>(mixture.stats().min_error);
  DecryptionCheck d;
  d.err = error_rate(model, cw.partition, cw.world.mu);
  d.cerr = iiv_misclassification(model, mixture, t);
  d.beta = std::max(0.0, 1.0 - 2.0 * d.cerr);
  d.delta = delta_calibration(model, cw.p, cw.world.mu, t);
  d.bound = 1.0 - d.beta - 2.0 / static_cast<double>(mixture.stats().min_error) - d.delta;
  d.holds = d.err >= d.bound - kCompareTolerance;
  return d;
}

}  // namespace halluc
