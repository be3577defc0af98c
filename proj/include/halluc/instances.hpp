#pragma once

// Seeded random instances for the property suites, and the suites
// themselves. Instance i of a suite run with seed s is generated from
// derive_seed(s, i), so results are independent of worker scheduling.

#include <cstdint>
#include <vector>

#include "halluc/numeric.hpp"
#include "halluc/reduction.hpp"
#include "halluc/world.hpp"

namespace halluc {

struct Instance {
  std::vector<double> mu;
  ConditionalModel p;      // training distribution
  ConditionalModel model;  // base model under test
  Partition partition;
};

struct InstanceLimits {
  std::uint32_t max_prompts = 20;
  std::uint32_t max_responses = 10;
};

/// Random (μ, p with p(V) = 1, p̂, partition) with nonempty V_c and E_c.
/// Models are drawn from a mix of generators: dense and sparse Dirichlet,
/// uniform, p itself, perturbations of p, mass piled on errors, and cells
/// placed just above or below the classification threshold.
Instance random_bound_instance(std::uint64_t seed, const InstanceLimits& limits = {});

/// As above with |V_c| = 1 and p a point mass on the valid response.
Instance random_multiple_choice_instance(std::uint64_t seed, const InstanceLimits& limits = {});

/// Model with full support, so cross-entropy is finite.
Instance random_full_support_instance(std::uint64_t seed, const InstanceLimits& limits = {});

struct MainBoundRow {
  std::uint64_t seed = 0;
  BoundReport report;
};

std::vector<MainBoundRow> verify_main_bound(std::size_t instances, std::uint64_t seed,
                                            Execution exec = Execution::parallel);

struct MultipleChoiceRow {
  std::uint64_t seed = 0;
  MultipleChoiceReport report;
};

std::vector<MultipleChoiceRow> verify_multiple_choice(std::size_t instances, std::uint64_t seed,
                                                      Execution exec = Execution::parallel);

struct DerivativeRow {
  std::uint64_t seed = 0;
  double threshold = 0.0;
  DerivativeReport report;
};

std::vector<DerivativeRow> verify_delta_derivative(std::size_t instances, std::uint64_t seed,
                                                   Execution exec = Execution::parallel);

}  // namespace halluc
