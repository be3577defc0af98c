#pragma once

// Finite prompt/response universes, conditional response distributions,
// valid/error partitions and seeded training samples.
//
// Responses of prompt c are the local ids 0 .. |R_c|-1. Rows of a
// ConditionalModel are stored sparsely: a handful of explicit cells plus one
// shared `fill` probability for every remaining cell. This keeps worlds with
// millions of prompts and hundreds of responses per prompt exact without a
// dense table, while dense rows (every cell explicit) remain available for
// small instances.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "halluc/numeric.hpp"

namespace halluc {

using PromptId = std::uint32_t;
using ResponseId = std::uint32_t;

inline constexpr std::size_t kMaxPrompts = 10'000'000;
inline constexpr std::size_t kMaxStoredCells = 30'000'000;

/// Raised for inputs that violate an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checks a probability vector. Sums within kProbTolerance of 1 are kept as
/// is, sums within kRenormTolerance are renormalized in place, anything else
/// throws InvalidInput mentioning `what`.
void normalize_distribution(std::vector<double>& probs, const std::string& what);

struct World {
  std::vector<double> mu;
  std::vector<std::uint32_t> response_count;  // |R_c|, abstain included
  ResponseId abstain_token = 0;
  std::vector<double> alpha;
  std::vector<ResponseId> answer;

  std::size_t prompts() const noexcept { return mu.size(); }
  /// μ is exactly uniform (every entry bitwise equal).
  bool uniform_mu() const noexcept;
  void validate() const;

  bool operator==(const World&) const = default;
};

struct ArbitraryFactsSpec {
  std::size_t n_prompts = 1;
  std::uint32_t response_set_size = 2;
  /// Constant α or one value per prompt.
  std::variant<double, std::vector<double>> alpha = 1.0;
  /// Empty means uniform.
  std::vector<double> mu;
  std::uint64_t seed = 0;
};

/// Arbitrary-facts world: a_c uniform over the non-abstain responses of each
/// prompt, drawn independently per prompt from `spec.seed`.
World build_arbitrary_facts(const ArbitraryFactsSpec& spec);

/// Read-only view of one model row.
struct RowView {
  std::uint32_t size = 0;
  double fill = 0.0;
  std::span<const ResponseId> ids;   // strictly increasing
  std::span<const double> probs;     // parallel to ids

  double prob(ResponseId r) const noexcept;
  std::uint32_t implicit_count() const noexcept {
    return size - static_cast<std::uint32_t>(ids.size());
  }
};

class ConditionalModel {
 public:
  struct Entry {
    ResponseId response;
    double prob;
  };

  class Builder {
   public:
    explicit Builder(std::size_t prompts_hint = 0);
    /// Row with the given explicit cells; every other cell gets `fill`.
    Builder& row(std::uint32_t size, double fill, std::span<const Entry> entries);
    Builder& row(std::uint32_t size, double fill, std::initializer_list<Entry> entries) {
      return row(size, fill, std::span<const Entry>(entries.begin(), entries.size()));
    }
    Builder& dense_row(std::span<const double> probs);
    ConditionalModel build() &&;

   private:
    std::vector<std::uint32_t> sizes_;
    std::vector<double> fill_;
    std::vector<std::size_t> offsets_;
    std::vector<ResponseId> ids_;
    std::vector<double> probs_;
    std::vector<Entry> scratch_;
  };

  ConditionalModel() = default;

  static ConditionalModel dense(const std::vector<std::vector<double>>& rows);
  static ConditionalModel uniform(std::span<const std::uint32_t> sizes);

  std::size_t prompts() const noexcept { return sizes_.size(); }
  std::uint32_t responses(PromptId c) const noexcept { return sizes_[c]; }
  std::span<const std::uint32_t> sizes() const noexcept { return sizes_; }
  std::size_t stored_cells() const noexcept { return ids_.size(); }

  RowView row(PromptId c) const noexcept {
    const std::size_t lo = offsets_[c];
    const std::size_t hi = offsets_[c + 1];
    return RowView{sizes_[c], fill_[c],
                   std::span<const ResponseId>(ids_.data() + lo, hi - lo),
                   std::span<const double>(probs_.data() + lo, hi - lo)};
  }
  double prob(PromptId c, ResponseId r) const noexcept { return row(c).prob(r); }
  std::vector<double> dense_row(PromptId c) const;

  bool operator==(const ConditionalModel&) const = default;

 private:
  std::vector<std::uint32_t> sizes_;
  std::vector<double> fill_;
  std::vector<std::size_t> offsets_{0};
  std::vector<ResponseId> ids_;
  std::vector<double> probs_;
};

/// Valid/error split per prompt. Valid sets are stored explicitly; every
/// other response of the prompt is an error.
class Partition {
 public:
  class Builder {
   public:
    explicit Builder(std::size_t prompts_hint = 0);
    Builder& row(std::uint32_t size, std::span<const ResponseId> valid);
    Builder& row(std::uint32_t size, std::initializer_list<ResponseId> valid) {
      return row(size, std::span<const ResponseId>(valid.begin(), valid.size()));
    }
    Partition build() &&;

   private:
    std::vector<std::uint32_t> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<ResponseId> ids_;
    std::vector<ResponseId> scratch_;
  };

  Partition() = default;

  std::size_t prompts() const noexcept { return sizes_.size(); }
  std::uint32_t responses(PromptId c) const noexcept { return sizes_[c]; }
  std::span<const std::uint32_t> sizes() const noexcept { return sizes_; }
  std::span<const ResponseId> valid(PromptId c) const noexcept {
    return {ids_.data() + offsets_[c], offsets_[c + 1] - offsets_[c]};
  }
  std::uint32_t valid_count(PromptId c) const noexcept {
    return static_cast<std::uint32_t>(offsets_[c + 1] - offsets_[c]);
  }
  std::uint32_t error_count(PromptId c) const noexcept {
    return sizes_[c] - valid_count(c);
  }
  bool is_valid(PromptId c, ResponseId r) const noexcept;

  bool operator==(const Partition&) const = default;

 private:
  std::vector<std::uint32_t> sizes_;
  std::vector<std::size_t> offsets_{0};
  std::vector<ResponseId> ids_;
};

struct TrainingSet {
  struct Pair {
    PromptId prompt;
    ResponseId response;
    bool operator==(const Pair&) const = default;
  };
  std::vector<Pair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  /// Every pair references a prompt and a response of `world`.
  void validate(const World& world) const;
  bool operator==(const TrainingSet&) const = default;
};

/// V_c = {a_c, abstain}, E_c = everything else. Worlds with a prompt whose
/// response set has fewer than three responses are rejected (empty E_c).
Partition truth_partition(const World& world);

/// p(a_c | c) = α_c, p(abstain | c) = 1 - α_c, zero elsewhere.
ConditionalModel training_distribution(const World& world);

/// n i.i.d. draws c ~ μ, r ~ p(· | c).
TrainingSet sample_training(const World& world, std::size_t n, std::uint64_t seed);

/// Model/partition/μ describe the same universe (prompt count and sizes).
void require_same_universe(const ConditionalModel& model, const Partition& partition,
                           std::span<const double> mu);
void require_same_universe(const ConditionalModel& a, const ConditionalModel& b,
                           std::span<const double> mu);

/// Walker/Vose alias table for O(1) draws from a fixed discrete distribution.
class AliasSampler {
 public:
  explicit AliasSampler(std::span<const double> weights);
  template <class G>
  std::size_t operator()(G& rng) const noexcept {
    const std::size_t i = rng.below(prob_.size());
    return rng.uniform() < prob_[i] ? i : alias_[i];
  }
  std::size_t size() const noexcept { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

/// Iterates the cells of one prompt as groups sharing identical
/// (model prob, reference prob, validity). Every id explicit in either row or
/// listed in `valid` is its own group of count 1; all remaining cells form a
/// single trailing group with the two fill values and valid = 0.
struct CellGroup {
  double q;              // model probability of each cell in the group
  double p;              // reference probability of each cell in the group
  std::uint32_t count;   // number of cells
  std::uint32_t valid;   // number of valid cells among them
  ResponseId first;      // smallest response id in the group
};

template <class F>
void for_each_group(const RowView& q, const RowView& p,
                    std::span<const ResponseId> valid, F&& f) {
  std::size_t iq = 0, ip = 0, iv = 0;
  std::uint32_t listed = 0;
  constexpr ResponseId kEnd = ~ResponseId{0};
  // Trailing-group first id: smallest id not visited.
  ResponseId next_unlisted = 0;
  bool have_unlisted = false;
  ResponseId expected = 0;
  while (true) {
    const ResponseId a = iq < q.ids.size() ? q.ids[iq] : kEnd;
    const ResponseId b = ip < p.ids.size() ? p.ids[ip] : kEnd;
    const ResponseId v = iv < valid.size() ? valid[iv] : kEnd;
    const ResponseId id = std::min({a, b, v});
    if (id == kEnd) break;
    if (!have_unlisted && id != expected) {
      next_unlisted = expected;
      have_unlisted = true;
    }
    expected = id + 1;
    CellGroup g{q.fill, p.fill, 1, 0, id};
    if (a == id) g.q = q.probs[iq++];
    if (b == id) g.p = p.probs[ip++];
    if (v == id) {
      g.valid = 1;
      ++iv;
    }
    ++listed;
    f(g);
  }
  if (listed < q.size) {
    if (!have_unlisted) next_unlisted = expected;
    f(CellGroup{q.fill, p.fill, q.size - listed, 0, next_unlisted});
  }
}

}  // namespace halluc
