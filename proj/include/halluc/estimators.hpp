#pragma once

// Singleton rate, missing mass with abstentions, classic Good-Turing, and
// Monte Carlo checks of their concentration bounds.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "halluc/numeric.hpp"
#include "halluc/world.hpp"

namespace halluc {

struct SingletonReport {
  std::size_t singleton_count = 0;
  std::size_t n = 0;
  double rate = 0.0;
  std::vector<PromptId> singleton_prompts;  // increasing
  bool degenerate = false;                  // n == 0
};

/// Prompts answered (non-abstain) exactly once in `training`.
SingletonReport singleton_rate(const TrainingSet& training, ResponseId abstain_token);

/// Prompts never answered with a non-abstain response.
std::vector<PromptId> unanswered_set(const TrainingSet& training, const World& world);

/// Σ_{c ∈ U} μ(c) α_c, computed from the world's parameters.
double missing_mass(const World& world, const TrainingSet& training);

using ItemId = std::uint64_t;

struct GoodTuringEstimate {
  std::size_t singletons = 0;
  std::size_t n = 0;
  double rate = 0.0;
  bool degenerate = false;  // empty sample
};

/// Fraction of samples whose item occurs exactly once.
GoodTuringEstimate good_turing_classic(std::span<const ItemId> samples);

/// Exact missing mass Σ_{x unseen} ν(x) for items 0 .. nu.size()-1.
double missing_mass_classic(std::span<const double> nu, std::span<const ItemId> samples);

/// |MM - sr| bound holding with probability >= 1 - gamma.
double mm_deviation_bound(std::size_t n, double gamma);
/// |M - GT| bound holding with probability >= 1 - gamma.
double gt_deviation_bound(std::size_t n, double gamma);

struct ConcentrationSample {
  std::uint64_t seed = 0;
  double estimate = 0.0;  // sr or GT
  double truth = 0.0;     // MM or M
  double deviation = 0.0;
  bool violated = false;
};

struct ConcentrationReport {
  std::size_t trials = 0;
  double gamma = 0.0;
  double bound = 0.0;
  std::size_t violations = 0;
  double empirical_failure_rate = 0.0;
  double allowed_violations = 0.0;
  bool vacuous = false;  // bound >= 1, nothing can violate it
  bool pass = false;
  std::vector<ConcentrationSample> samples;  // by trial index
};

struct MissingMassConfig {
  std::size_t n_prompts = 5'000'000;
  std::uint32_t response_set_size = 366;
  double alpha = 0.8;
  std::size_t n = 1'000'000;
  double gamma = 0.01;
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
};

/// Per trial: fresh arbitrary-facts world and training sample; counts
/// violations of |MM - sr| <= 4.42 sqrt(ln(5/γ)/N).
ConcentrationReport verify_mm_concentration(const MissingMassConfig& config,
                                            Execution exec = Execution::parallel);

struct ZipfConfig {
  std::size_t items = 10'000;
  double exponent = 1.1;
  std::size_t n = 100'000;
  double gamma = 0.05;
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
};

/// ν(k) ∝ (k+1)^-s for k = 0 .. items-1.
std::vector<double> zipf_distribution(std::size_t items, double exponent);

/// Per trial: N fresh Zipf draws; counts violations of
/// |M - GT| <= 1/N + 2.42 sqrt(ln(4/γ)/N).
ConcentrationReport verify_gt_concentration(const ZipfConfig& config,
                                            Execution exec = Execution::parallel);

}  // namespace halluc
