#include "halluc/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "halluc/rng.hpp"

namespace halluc {

namespace {

// Non-abstain occurrence count per prompt, saturating at 2.
std::vector<std::uint8_t> answered_counts(const TrainingSet& training, std::size_t prompts,
                                          ResponseId abstain) {
  std::vector<std::uint8_t> counts(prompts, 0);
  for (const auto& [c, r] : training.pairs) {
    if (r == abstain) continue;
    if (c >= prompts) throw InvalidInput("training pair references an unknown prompt");
    if (counts[c] < 2) ++counts[c];
  }
  return counts;
}

std::size_t max_prompt_plus_one(const TrainingSet& training) {
  std::size_t m = 0;
  for (const auto& pair : training.pairs) m = std::max<std::size_t>(m, pair.prompt + 1);
  return m;
}

double mass_of_unanswered(const World& world, std::span<const std::uint8_t> counts) {
  CompensatedSum s;
  for (std::size_t c = 0; c < world.prompts(); ++c) {
    if (counts[c] == 0) s.add(world.mu[c] * world.alpha[c]);
  }
  return s.value();
}

ConcentrationReport finish_report(std::vector<ConcentrationSample> samples, double gamma,
                                  double bound) {
  ConcentrationReport rep;
  rep.trials = samples.size();
  rep.gamma = gamma;
  rep.bound = bound;
  rep.vacuous = bound >= 1.0;
  rep.violations = static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.violated; }));
  rep.empirical_failure_rate =
      rep.trials == 0 ? 0.0 : static_cast<double>(rep.violations) / static_cast<double>(rep.trials);
  rep.allowed_violations = binomial_violation_limit(rep.trials, gamma);
  rep.pass = within_binomial_slack(rep.violations, rep.trials, gamma);
  rep.samples = std::move(samples);
  return rep;
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must be in (0, 1]");
}

}  // namespace

SingletonReport singleton_rate(const TrainingSet& training, ResponseId abstain_token) {
  SingletonReport rep;
  rep.n = training.size();
  if (rep.n == 0) {
    rep.degenerate = true;
    return rep;
  }
  const auto counts = answered_counts(training, max_prompt_plus_one(training), abstain_token);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 1) rep.singleton_prompts.push_back(static_cast<PromptId>(c));
  }
  rep.singleton_count = rep.singleton_prompts.size();
  rep.rate = static_cast<double>(rep.singleton_count) / static_cast<double>(rep.n);
  return rep;
}

std::vector<PromptId> unanswered_set(const TrainingSet& training, const World& world) {
  const auto counts = answered_counts(training, world.prompts(), world.abstain_token);
  std::vector<PromptId> out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) out.push_back(static_cast<PromptId>(c));
  }
  return out;
}

double missing_mass(const World& world, const TrainingSet& training) {
  const auto counts = answered_counts(training, world.prompts(), world.abstain_token);
  return mass_of_unanswered(world, counts);
}

GoodTuringEstimate good_turing_classic(std::span<const ItemId> samples) {
  GoodTuringEstimate est;
  est.n = samples.size();
  if (est.n == 0) {
    est.degenerate = true;
    return est;
  }
  std::vector<ItemId> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i + 1;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i == 1) ++est.singletons;
    i = j;
  }
  est.rate = static_cast<double>(est.singletons) / static_cast<double>(est.n);
  return est;
}

double missing_mass_classic(std::span<const double> nu, std::span<const ItemId> samples) {
  std::vector<bool> seen(nu.size(), false);
  for (ItemId x : samples) {
    if (x >= nu.size()) throw InvalidInput("sample item outside the distribution's support");
    seen[x] = true;
  }
  CompensatedSum s;
  for (std::size_t x = 0; x < nu.size(); ++x) {
    if (!seen[x]) s.add(nu[x]);
  }
  return s.value();
}

double mm_deviation_bound(std::size_t n, double gamma) {
  check_gamma(gamma);
  if (n == 0) return INFINITY;
  return 4.42 * std::sqrt(std::log(5.0 / gamma) / static_cast<double>(n));
}

double gt_deviation_bound(std::size_t n, double gamma) {
  check_gamma(gamma);
  if (n == 0) return INFINITY;
  const double nn = static_cast<double>(n);
  return 1.0 / nn + 2.42 * std::sqrt(std::log(4.0 / gamma) / nn);
}

ConcentrationReport verify_mm_concentration(const MissingMassConfig& config, Execution exec) {
  if (config.trials < 100) throw InvalidInput("missing-mass check needs at least 100 trials");
  if (config.n < 1) throw InvalidInput("missing-mass check needs N >= 1");
  const double bound = mm_deviation_bound(config.n, config.gamma);
  std::vector<ConcentrationSample> samples(config.trials);
  for_each_index(
      config.trials,
      [&](std::size_t i) {
        const std::uint64_t trial_seed = derive_seed(config.seed, i);
        ArbitraryFactsSpec spec;
        spec.n_prompts = config.n_prompts;
        spec.response_set_size = config.response_set_size;
        spec.alpha = config.alpha;
        spec.seed = derive_seed(trial_seed, 0);
        const World world = build_arbitrary_facts(spec);
        const TrainingSet training = sample_training(world, config.n, derive_seed(trial_seed, 1));
        const auto counts = answered_counts(training, world.prompts(), world.abstain_token);
        const auto singles = static_cast<std::size_t>(std::count(counts.begin(), counts.end(), 1));
        ConcentrationSample s;
        s.seed = trial_seed;
        s.estimate = static_cast<double>(singles) / static_cast<double>(config.n);
        s.truth = mass_of_unanswered(world, counts);
        s.deviation = std::abs(s.truth - s.estimate);
        s.violated = s.deviation > bound;
        samples[i] = s;
      },
      exec);
  return finish_report(std::move(samples), config.gamma, bound);
}

std::vector<double> zipf_distribution(std::size_t items, double exponent) {
  if (items == 0) throw InvalidInput("zipf: need at least one item");
  if (!(exponent > 0.0) || !std::isfinite(exponent)) throw InvalidInput("zipf: bad exponent");
  std::vector<double> nu(items);
  CompensatedSum s;
  for (std::size_t k = 0; k < items; ++k) {
    nu[k] = std::pow(static_cast<double>(k + 1), -exponent);
    s.add(nu[k]);
  }
  const double z = s.value();
  for (double& x : nu) x /= z;
  return nu;
}

ConcentrationReport verify_gt_concentration(const ZipfConfig& config, Execution exec) {
  if (config.trials < 100) throw InvalidInput("Good-Turing check needs at least 100 trials");
  if (config.n < 1) throw InvalidInput("Good-Turing check needs N >= 1");
  const double bound = gt_deviation_bound(config.n, config.gamma);
  const std::vector<double> nu = zipf_distribution(config.items, config.exponent);
  const AliasSampler sampler(nu);
  std::vector<ConcentrationSample> samples(config.trials);
  for_each_index(
      config.trials,
      [&](std::size_t i) {
        const std::uint64_t trial_seed = derive_seed(config.seed, i);
        Rng rng(trial_seed);
        std::vector<std::uint32_t> counts(nu.size(), 0);
        for (std::size_t k = 0; k < config.n; ++k) ++counts[sampler(rng)];
        std::size_t singles = 0;
        CompensatedSum missing;
        for (std::size_t x = 0; x < nu.size(); ++x) {
          if (counts[x] == 1) ++singles;
          if (counts[x] == 0) missing.add(nu[x]);
        }
        ConcentrationSample s;
        s.seed = trial_seed;
        s.estimate = static_cast<double>(singles) / static_cast<double>(config.n);
        s.truth = missing.value();
        s.deviation = std::abs(s.truth - s.estimate);
        s.violated = s.deviation > bound;
        samples[i] = s;
      },
      exec);
  return finish_report(std::move(samples), config.gamma, bound);
}

}  // namespace halluc
