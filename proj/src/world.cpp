#include "halluc/world.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "halluc/rng.hpp"

namespace halluc {

namespace {

std::string at_prompt(std::size_t c) { return " (prompt c" + std::to_string(c) + ")"; }

}  // namespace

void normalize_distribution(std::vector<double>& probs, const std::string& what) {
  if (probs.empty()) throw InvalidInput(what + ": empty probability vector");
  CompensatedSum s;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double x = probs[i];
    if (!std::isfinite(x) || x < 0.0) {
      throw InvalidInput(what + ": entry " + std::to_string(i) +
                         " is not a non-negative finite number");
    }
    s.add(x);
  }
  const double total = s.value();
  const double gap = std::abs(total - 1.0);
  if (gap <= kProbTolerance) return;
  if (gap <= kRenormTolerance) {
    for (double& x : probs) x /= total;
    return;
  }
  throw InvalidInput(what + ": sums to " + std::to_string(total) + ", not 1");
}

bool World::uniform_mu() const noexcept {
  return std::all_of(mu.begin(), mu.end(), [&](double x) { return x == mu.front(); });
}

void World::validate() const {
  const std::size_t n = mu.size();
  if (n == 0) throw InvalidInput("world: no prompts");
  if (n > kMaxPrompts) {
    throw InvalidInput("world: " + std::to_string(n) + " prompts exceeds the cap of " +
                       std::to_string(kMaxPrompts));
  }
  if (response_count.size() != n || alpha.size() != n || answer.size() != n) {
    throw InvalidInput("world: per-prompt vectors have inconsistent lengths");
  }
  CompensatedSum s;
  for (std::size_t c = 0; c < n; ++c) {
    if (!std::isfinite(mu[c]) || mu[c] < 0.0) throw InvalidInput("world: bad mu" + at_prompt(c));
    s.add(mu[c]);
    if (response_count[c] < 2) {
      throw InvalidInput("world: response set needs an answer and the abstain token" +
                         at_prompt(c));
    }
    if (abstain_token >= response_count[c]) {
      throw InvalidInput("world: abstain token outside the response set" + at_prompt(c));
    }
    if (!(alpha[c] >= 0.0 && alpha[c] <= 1.0)) {
      throw InvalidInput("world: alpha not in [0,1]" + at_prompt(c));
    }
    if (answer[c] >= response_count[c] || answer[c] == abstain_token) {
      throw InvalidInput("world: answer must be a non-abstain response" + at_prompt(c));
    }
  }
  if (std::abs(s.value() - 1.0) > kProbTolerance) {
    throw InvalidInput("world: mu sums to " + std::to_string(s.value()));
  }
}

World build_arbitrary_facts(const ArbitraryFactsSpec& spec) {
  if (spec.n_prompts < 1) throw InvalidInput("arbitrary facts: n_prompts must be >= 1");
  if (spec.n_prompts > kMaxPrompts) {
    throw InvalidInput("arbitrary facts: n_prompts exceeds the cap of " +
                       std::to_string(kMaxPrompts));
  }
  if (spec.response_set_size < 2) {
    throw InvalidInput("arbitrary facts: response_set_size must be >= 2");
  }
  const std::size_t n = spec.n_prompts;
  World w;
  w.abstain_token = 0;
  w.response_count.assign(n, spec.response_set_size);

  if (spec.mu.empty()) {
    w.mu.assign(n, 1.0 / static_cast<double>(n));
  } else {
    if (spec.mu.size() != n) throw InvalidInput("arbitrary facts: mu has the wrong length");
    w.mu = spec.mu;
    normalize_distribution(w.mu, "arbitrary facts: mu");
  }

  if (const auto* a = std::get_if<double>(&spec.alpha)) {
    if (!(*a >= 0.0 && *a <= 1.0)) throw InvalidInput("arbitrary facts: alpha not in [0,1]");
    w.alpha.assign(n, *a);
  } else {
    const auto& v = std::get<std::vector<double>>(spec.alpha);
    if (v.size() != n) throw InvalidInput("arbitrary facts: alpha has the wrong length");
    for (std::size_t c = 0; c < n; ++c) {
      if (!(v[c] >= 0.0 && v[c] <= 1.0)) {
        throw InvalidInput("arbitrary facts: alpha not in [0,1]" + at_prompt(c));
      }
    }
    w.alpha = v;
  }

  // Answers are drawn from {1, ..., k-1}; id 0 is the abstain token.
  Rng rng(spec.seed);
  w.answer.resize(n);
  const std::uint64_t choices = spec.response_set_size - 1;
  for (std::size_t c = 0; c < n; ++c) {
    w.answer[c] = static_cast<ResponseId>(1 + rng.below(choices));
  }
  return w;
}

double RowView::prob(ResponseId r) const noexcept {
  const auto it = std::lower_bound(ids.begin(), ids.end(), r);
  if (it != ids.end() && *it == r) return probs[static_cast<std::size_t>(it - ids.begin())];
  return fill;
}

ConditionalModel::Builder::Builder(std::size_t prompts_hint) {
  sizes_.reserve(prompts_hint);
  fill_.reserve(prompts_hint);
  ids_.reserve(prompts_hint);
  probs_.reserve(prompts_hint);
  offsets_.reserve(prompts_hint + 1);
  offsets_.push_back(0);
}

ConditionalModel::Builder& ConditionalModel::Builder::row(std::uint32_t size, double fill,
                                                        std::span<const Entry> entries) {
  const std::size_t c = sizes_.size();
  if (size == 0) throw InvalidInput("model: empty response set" + at_prompt(c));
  if (entries.size() > size) throw InvalidInput("model: more entries than responses" + at_prompt(c));
  if (!std::isfinite(fill) || fill < 0.0) throw InvalidInput("model: bad fill" + at_prompt(c));
  scratch_.assign(entries.begin(), entries.end());
  const auto by_id = [](const Entry& a, const Entry& b) { return a.response < b.response; };
  if (!std::is_sorted(scratch_.begin(), scratch_.end(), by_id)) {
    std::sort(scratch_.begin(), scratch_.end(), by_id);
  }
  CompensatedSum s;
  for (std::size_t i = 0; i < scratch_.size(); ++i) {
    const Entry& e = scratch_[i];
    if (e.response >= size) throw InvalidInput("model: response id out of range" + at_prompt(c));
    if (i > 0 && scratch_[i - 1].response == e.response) {
      throw InvalidInput("model: duplicate response id" + at_prompt(c));
    }
    if (!std::isfinite(e.prob) || e.prob < 0.0) {
      throw InvalidInput("model: negative or non-finite probability" + at_prompt(c));
    }
    s.add(e.prob);
  }
  const auto implicit = static_cast<double>(size - scratch_.size());
  s.add(implicit * fill);
  const double total = s.value();
  const double gap = std::abs(total - 1.0);
  if (gap > kRenormTolerance) {
    throw InvalidInput("model: row sums to " + std::to_string(total) + at_prompt(c));
  }
  const double scale = gap > kProbTolerance ? 1.0 / total : 1.0;
  if (ids_.size() + scratch_.size() > kMaxStoredCells) {
    throw InvalidInput("model: more than " + std::to_string(kMaxStoredCells) +
                       " explicitly stored cells");
  }
  for (const Entry& e : scratch_) {
    ids_.push_back(e.response);
    probs_.push_back(e.prob * scale);
  }
  sizes_.push_back(size);
  fill_.push_back(fill * scale);
  offsets_.push_back(ids_.size());
  return *this;
}

ConditionalModel::Builder& ConditionalModel::Builder::dense_row(std::span<const double> probs) {
  scratch_.clear();
  std::vector<Entry> entries;
  entries.reserve(probs.size());
  for (std::size_t r = 0; r < probs.size(); ++r) {
    entries.push_back(Entry{static_cast<ResponseId>(r), probs[r]});
  }
  return row(static_cast<std::uint32_t>(probs.size()), 0.0, entries);
}

ConditionalModel ConditionalModel::Builder::build() && {
  if (sizes_.size() > kMaxPrompts) throw InvalidInput("model: too many prompts");
  ConditionalModel m;
  m.sizes_ = std::move(sizes_);
  m.fill_ = std::move(fill_);
  m.offsets_ = std::move(offsets_);
  m.ids_ = std::move(ids_);
  m.probs_ = std::move(probs_);
  return m;
}

ConditionalModel ConditionalModel::dense(const std::vector<std::vector<double>>& rows) {
  Builder b(rows.size());
  for (const auto& r : rows) b.dense_row(r);
  return std::move(b).build();
}

ConditionalModel ConditionalModel::uniform(std::span<const std::uint32_t> sizes) {
  Builder b(sizes.size());
  for (std::uint32_t k : sizes) b.row(k, 1.0 / static_cast<double>(k), {});
  return std::move(b).build();
}

std::vector<double> ConditionalModel::dense_row(PromptId c) const {
  const RowView v = row(c);
  std::vector<double> out(v.size, v.fill);
  for (std::size_t i = 0; i < v.ids.size(); ++i) out[v.ids[i]] = v.probs[i];
  return out;
}

Partition::Builder::Builder(std::size_t prompts_hint) {
  sizes_.reserve(prompts_hint);
  ids_.reserve(prompts_hint);
  offsets_.reserve(prompts_hint + 1);
  offsets_.push_back(0);
}

Partition::Builder& Partition::Builder::row(std::uint32_t size,
                                            std::span<const ResponseId> valid) {
  const std::size_t c = sizes_.size();
  scratch_.assign(valid.begin(), valid.end());
  if (!std::is_sorted(scratch_.begin(), scratch_.end())) std::sort(scratch_.begin(), scratch_.end());
  for (std::size_t i = 0; i < scratch_.size(); ++i) {
    if (scratch_[i] >= size) throw InvalidInput("partition: valid id out of range" + at_prompt(c));
    if (i > 0 && scratch_[i] == scratch_[i - 1]) {
      throw InvalidInput("partition: duplicate valid id" + at_prompt(c));
    }
  }
  if (scratch_.empty()) throw InvalidInput("partition: empty valid set" + at_prompt(c));
  if (scratch_.size() == size) throw InvalidInput("partition: empty error set" + at_prompt(c));
  ids_.insert(ids_.end(), scratch_.begin(), scratch_.end());
  sizes_.push_back(size);
  offsets_.push_back(ids_.size());
  return *this;
}

Partition Partition::Builder::build() && {
  Partition p;
  p.sizes_ = std::move(sizes_);
  p.offsets_ = std::move(offsets_);
  p.ids_ = std::move(ids_);
  return p;
}

bool Partition::is_valid(PromptId c, ResponseId r) const noexcept {
  const auto v = valid(c);
  return std::binary_search(v.begin(), v.end(), r);
}

void TrainingSet::validate(const World& world) const {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [c, r] = pairs[i];
    if (c >= world.prompts() || r >= world.response_count[c]) {
      throw InvalidInput("training set: pair " + std::to_string(i) +
                         " references a cell outside the world");
    }
  }
}

Partition truth_partition(const World& world) {
  world.validate();
  Partition::Builder b(world.prompts());
  for (std::size_t c = 0; c < world.prompts(); ++c) {
    if (world.response_count[c] < 3) {
      throw InvalidInput("truth partition: |R_c| < 3 leaves E_c empty" + at_prompt(c));
    }
    b.row(world.response_count[c], {world.abstain_token, world.answer[c]});
  }
  return std::move(b).build();
}

ConditionalModel training_distribution(const World& world) {
  world.validate();
  ConditionalModel::Builder b(world.prompts());
  for (std::size_t c = 0; c < world.prompts(); ++c) {
    const double a = world.alpha[c];
    if (a == 1.0) {
      b.row(world.response_count[c], 0.0, {{world.answer[c], 1.0}});
    } else if (a == 0.0) {
      b.row(world.response_count[c], 0.0, {{world.abstain_token, 1.0}});
    } else {
      b.row(world.response_count[c], 0.0,
            {{world.answer[c], a}, {world.abstain_token, 1.0 - a}});
    }
  }
  return std::move(b).build();
}

TrainingSet sample_training(const World& world, std::size_t n, std::uint64_t seed) {
  TrainingSet t;
  t.pairs.resize(n);
  if (n == 0) return t;
  Rng rng(seed);
  const bool uniform = world.uniform_mu();
  std::optional<AliasSampler> sampler;
  if (!uniform) sampler.emplace(world.mu);
  const std::uint64_t prompts = world.prompts();
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<PromptId>(uniform ? rng.below(prompts) : (*sampler)(rng));
    const bool answered = rng.uniform() < world.alpha[c];
    t.pairs[i] = {c, answered ? world.answer[c] : world.abstain_token};
  }
  return t;
}

void require_same_universe(const ConditionalModel& model, const Partition& partition,
                           std::span<const double> mu) {
  if (model.prompts() != partition.prompts() || model.prompts() != mu.size()) {
    throw InvalidInput("model, partition and mu disagree on the number of prompts");
  }
  if (!std::equal(model.sizes().begin(), model.sizes().end(), partition.sizes().begin())) {
    throw InvalidInput("model and partition disagree on response set sizes");
  }
}

void require_same_universe(const ConditionalModel& a, const ConditionalModel& b,
                           std::span<const double> mu) {
  if (a.prompts() != b.prompts() || a.prompts() != mu.size()) {
    throw InvalidInput("models and mu disagree on the number of prompts");
  }
  if (!std::equal(a.sizes().begin(), a.sizes().end(), b.sizes().begin())) {
    throw InvalidInput("models disagree on response set sizes");
  }
}

AliasSampler::AliasSampler(std::span<const double> weights)
    : prob_(weights.size(), 0.0), alias_(weights.size(), 0) {
  const std::size_t n = weights.size();
  if (n == 0) throw InvalidInput("alias sampler: no outcomes");
  CompensatedSum s;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidInput("alias sampler: bad weight");
    s.add(w);
  }
  const double total = s.value();
  if (!(total > 0.0)) throw InvalidInput("alias sampler: weights sum to zero");
  std::vector<double> scaled(n);
  std::vector<std::size_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s_i = small.back();
    small.pop_back();
    const std::size_t l_i = large.back();
    prob_[s_i] = scaled[s_i];
    alias_[s_i] = l_i;
    scaled[l_i] = (scaled[l_i] + scaled[s_i]) - 1.0;
    if (scaled[l_i] < 1.0) {
      large.pop_back();
      small.push_back(l_i);
    }
  }
  for (std::size_t i : large) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  for (std::size_t i : small) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
}

}  // namespace halluc
