#include "halluc/reduction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace halluc {

namespace {

RowView empty_row(std::uint32_t size) { return RowView{size, 0.0, {}, {}}; }

// Sorted copy of the thresholds plus the permutation back to input order.
struct SortedThresholds {
  std::vector<double> values;
  std::vector<std::size_t> order;  // values[j] == input[order[j]]

  explicit SortedThresholds(std::span<const double> input) : order(input.size()) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return input[a] < input[b]; });
    values.reserve(input.size());
    for (std::size_t i : order) values.push_back(input[i]);
  }
  // Index of the first threshold >= q; cells with value q are above exactly
  // the thresholds with smaller index.
  std::size_t first_not_below(double q) const {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), q) -
                                    values.begin());
  }
};

void check_threshold(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidInput("threshold must be in [0, 1]");
}

double noise_mass(const ConditionalModel& p, const Partition& partition,
                  std::span<const double> mu) {
  return blocked_sum<1>(mu.size(), [&](std::size_t c, std::span<CompensatedSum> acc) {
    if (mu[c] == 0.0) return;
    const auto pc = static_cast<PromptId>(c);
    const RowView row = p.row(pc);
    for_each_group(row, empty_row(row.size), partition.valid(pc), [&](const CellGroup& g) {
      acc[0].add(mu[c] * g.q * static_cast<double>(g.count - g.valid));
    });
  })[0];
}

}  // namespace

PartitionStats partition_stats(const Partition& partition, std::span<const double> mu) {
  if (partition.prompts() != mu.size()) {
    throw InvalidInput("partition and mu disagree on the number of prompts");
  }
  PartitionStats s;
  s.min_error = std::numeric_limits<std::uint32_t>::max();
  s.min_valid = std::numeric_limits<std::uint32_t>::max();
  bool any = false;
  for (std::size_t c = 0; c < mu.size(); ++c) {
    if (!(mu[c] > 0.0)) continue;
    any = true;
    const auto pc = static_cast<PromptId>(c);
    s.min_error = std::min(s.min_error, partition.error_count(pc));
    s.max_error = std::max(s.max_error, partition.error_count(pc));
    s.max_valid = std::max(s.max_valid, partition.valid_count(pc));
    s.min_valid = std::min(s.min_valid, partition.valid_count(pc));
  }
  if (!any) throw InvalidInput("mu has no prompt with positive probability");
  return s;
}

double default_threshold(const Partition& partition, std::span<const double> mu) {
  return 1.0 / static_cast<double>(partition_stats(partition, mu).min_error);
}

IIVMixture::IIVMixture(const ConditionalModel& p, const Partition& partition,
                       std::span<const double> mu)
    : p_(&p), partition_(&partition), mu_(mu), stats_(partition_stats(partition, mu)) {
  require_same_universe(p, partition, mu);
}

double IIVMixture::prob(PromptId c, ResponseId r) const {
  if (partition_->is_valid(c, r)) return mu_[c] * p_->prob(c, r) / 2.0;
  return mu_[c] / (2.0 * static_cast<double>(partition_->error_count(c)));
}

double IIVMixture::total() const {
  return blocked_sum<1>(mu_.size(), [&](std::size_t c, std::span<CompensatedSum> acc) {
    if (mu_[c] == 0.0) return;
    const auto pc = static_cast<PromptId>(c);
    const RowView row = p_->row(pc);
    const double err_w = mu_[c] / (2.0 * static_cast<double>(partition_->error_count(pc)));
    for_each_group(row, empty_row(row.size), partition_->valid(pc), [&](const CellGroup& g) {
      acc[0].add(g.valid * mu_[c] * g.q / 2.0);
      acc[0].add(static_cast<double>(g.count - g.valid) * err_w);
    });
  })[0];
}

double error_rate(const ConditionalModel& model, const Partition& partition,
                  std::span<const double> mu) {
  require_same_universe(model, partition, mu);
  return blocked_sum<1>(mu.size(), [&](std::size_t c, std::span<CompensatedSum> acc) {
    if (mu[c] == 0.0) return;
    const auto pc = static_cast<PromptId>(c);
    const RowView row = model.row(pc);
    for_each_group(row, empty_row(row.size), partition.valid(pc), [&](const CellGroup& g) {
      acc[0].add(mu[c] * g.q * static_cast<double>(g.count - g.valid));
    });
  })[0];
}

std::vector<double> misclassification_profile(const ConditionalModel& model,
                                              const IIVMixture& mixture,
                                              std::span<const double> thresholds) {
  const auto& partition = mixture.partition();
  const auto& p = mixture.p();
  const auto mu = mixture.mu();
  require_same_universe(model, partition, mu);
  for (double t : thresholds) check_threshold(t);
  const SortedThresholds sorted(thresholds);
  const std::size_t T = sorted.values.size();
  // Buckets [0, T]: false negatives at index k count for thresholds j >= k,
  // false positives at index k count for thresholds j < k.
  const auto buckets = blocked_sum(
      mu.size(), 2 * (T + 1), [&](std::size_t c, std::span<CompensatedSum> acc) {
        if (mu[c] == 0.0) return;
        const auto pc = static_cast<PromptId>(c);
        const double err_w = mu[c] / (2.0 * static_cast<double>(partition.error_count(pc)));
        for_each_group(model.row(pc), p.row(pc), partition.valid(pc), [&](const CellGroup& g) {
          const std::size_t k = sorted.first_not_below(g.q);
          if (g.valid > 0) acc[k].add(mu[c] * g.p / 2.0);
          const std::uint32_t errors = g.count - g.valid;
          if (errors > 0) acc[T + 1 + k].add(static_cast<double>(errors) * err_w);
        });
      });
  std::vector<double> out(T, 0.0);
  // Prefix sums of false negatives, suffix sums of false positives.
  std::vector<double> fn(T), fp(T);
  {
    CompensatedSum s;
    for (std::size_t j = 0; j < T; ++j) {
      s.add(buckets[j]);
      fn[j] = s.value();
    }
  }
  {
    CompensatedSum s;
    for (std::size_t j = T; j-- > 0;) {
      s.add(buckets[T + 1 + j + 1]);
      fp[j] = s.value();
    }
  }
  for (std::size_t j = 0; j < T; ++j) out[sorted.order[j]] = fn[j] + fp[j];
  return out;
}

double iiv_misclassification(const ConditionalModel& model, const IIVMixture& mixture,
                             std::optional<double> threshold) {
  const double t = threshold.value_or(1.0 / static_cast<double>(mixture.stats().min_error));
  const double ts[1] = {t};
  return misclassification_profile(model, mixture, ts)[0];
}

double expected_misclassification_uniform_threshold(const ConditionalModel& model,
                                                    const IIVMixture& mixture) {
  const auto& partition = mixture.partition();
  const auto& p = mixture.p();
  const auto mu = mixture.mu();
  require_same_universe(model, partition, mu);
  return blocked_sum<1>(mu.size(), [&](std::size_t c, std::span<CompensatedSum> acc) {
    if (mu[c] == 0.0) return;
    const auto pc = static_cast<PromptId>(c);
    const double err_w = mu[c] / (2.0 * static_cast<double>(partition.error_count(pc)));
    for_each_group(model.row(pc), p.row(pc), partition.valid(pc), [&](const CellGroup& g) {
      const double above = std::min(g.q, 1.0);
      if (g.valid > 0) acc[0].add(mu[c] * g.p / 2.0 * (1.0 - above));
      acc[0].add(static_cast<double>(g.count - g.valid) * err_w * above);
    });
  })[0];
}

std::vector<double> delta_profile(const ConditionalModel& model, const ConditionalModel& p,
                                  std::span<const double> mu, std::span<const double> thresholds) {
  require_same_universe(model, p, mu);
  for (double t : thresholds) check_threshold(t);
  const SortedThresholds sorted(thresholds);
  const std::size_t T = sorted.values.size();
  const auto buckets =
      blocked_sum(mu.size(), T + 1, [&](std::size_t c, std::span<CompensatedSum> acc) {
        if (mu[c] == 0.0) return;
        const auto pc = static_cast<PromptId>(c);
        for_each_group(model.row(pc), p.row(pc), {}, [&](const CellGroup& g) {
          const double diff = g.q - g.p;
          if (diff == 0.0) return;
          acc[sorted.first_not_below(g.q)].add(mu[c] * static_cast<double>(g.count) * diff);
        });
      });
  std::vector<double> out(T, 0.0);
  CompensatedSum s;
  for (std::size_t j = T; j-- > 0;) {
    s.add(buckets[j + 1]);
    out[sorted.order[j]] = std::abs(s.value());
  }
  return out;
}

double delta_calibration(const ConditionalModel& model, const ConditionalModel& p,
                         std::span<const double> mu, double threshold) {
  const double ts[1] = {threshold};
  return delta_profile(model, p, mu, ts)[0];
}

std::vector<double> attained_probabilities(const ConditionalModel& model) {
  std::vector<double> values{0.0, 1.0};
  double last = 0.0;
  auto insert = [&](double v) {
    if (v == last) return;
    last = v;
    const auto it = std::lower_bound(values.begin(), values.end(), v);
    if (it == values.end() || *it != v) values.insert(it, v);
  };
  for (std::size_t c = 0; c < model.prompts(); ++c) {
    const RowView row = model.row(static_cast<PromptId>(c));
    for (double v : row.probs) insert(v);
    if (row.implicit_count() > 0) insert(row.fill);
  }
  return values;
}

BoundReport check_main_bound(const ConditionalModel& p, const ConditionalModel& model,
                             const Partition& partition, std::span<const double> mu) {
  require_same_universe(model, partition, mu);
  require_same_universe(p, partition, mu);
  const double pe = noise_mass(p, partition, mu);
  if (pe > kProbTolerance) {
    throw NoisyTrainingDistribution("training distribution puts mass " + std::to_string(pe) +
                                    " on errors; the bound needs p(E) = 0");
  }
  const IIVMixture mixture(p, partition, mu);
  const PartitionStats& st = mixture.stats();
  BoundReport rep;
  rep.threshold = 1.0 / static_cast<double>(st.min_error);
  rep.ratio_term = static_cast<double>(st.max_valid) / static_cast<double>(st.min_error);
  rep.err = error_rate(model, partition, mu);
  rep.cerr = iiv_misclassification(model, mixture, rep.threshold);
  rep.delta = delta_calibration(model, p, mu, rep.threshold);
  rep.lhs = rep.err;
  rep.rhs = 2.0 * rep.cerr - rep.ratio_term - rep.delta;
  rep.holds = rep.lhs >= rep.rhs - kCompareTolerance;
  return rep;
}

SupportViolation::SupportViolation(PromptId c, ResponseId r)
    : InvalidInput("model assigns zero probability to cell (c" + std::to_string(c) + ", r" +
                   std::to_string(r) + ") in the support of the reference distribution"),
      prompt(c),
      response(r) {}

double cross_entropy(const ConditionalModel& model, const ConditionalModel& p,
                     std::span<const double> mu) {
  require_same_universe(model, p, mu);
  constexpr std::uint64_t kNone = std::numeric_limits<std::uint64_t>::max();
  std::atomic<std::uint64_t> first_bad{kNone};
  const double loss = blocked_sum<1>(mu.size(), [&](std::size_t c, std::span<CompensatedSum> acc) {
    if (mu[c] == 0.0) return;
    const auto pc = static_cast<PromptId>(c);
    for_each_group(model.row(pc), p.row(pc), {}, [&](const CellGroup& g) {
      if (g.p == 0.0) return;
      if (g.q == 0.0) {
        const std::uint64_t key = (static_cast<std::uint64_t>(c) << 32) | g.first;
        std::uint64_t cur = first_bad.load();
        while (key < cur && !first_bad.compare_exchange_weak(cur, key)) {
        }
        return;
      }
      acc[0].add(mu[c] * static_cast<double>(g.count) * g.p * -std::log(g.q));
    });
  })[0];
  if (const std::uint64_t bad = first_bad.load(); bad != kNone) {
    throw SupportViolation(static_cast<PromptId>(bad >> 32),
                           static_cast<ResponseId>(bad & 0xFFFFFFFFULL));
  }
  return loss;
}

ConditionalModel rescaled_model(const ConditionalModel& model, double s, double threshold) {
  if (!(s > 0.0) || !std::isfinite(s)) throw InvalidInput("scale must be positive");
  check_threshold(threshold);
  ConditionalModel::Builder b(model.prompts());
  std::vector<ConditionalModel::Entry> entries;
  for (std::size_t c = 0; c < model.prompts(); ++c) {
    const RowView row = model.row(static_cast<PromptId>(c));
    auto scaled = [&](double q) { return q > threshold ? s * q : q; };
    CompensatedSum z;
    for (double q : row.probs) z.add(scaled(q));
    z.add(static_cast<double>(row.implicit_count()) * scaled(row.fill));
    const double norm = z.value();
    entries.clear();
    for (std::size_t i = 0; i < row.ids.size(); ++i) {
      entries.push_back({row.ids[i], scaled(row.probs[i]) / norm});
    }
    b.row(row.size, scaled(row.fill) / norm, entries);
  }
  return std::move(b).build();
}

DerivativeReport delta_derivative_check(const ConditionalModel& model, const ConditionalModel& p,
                                        std::span<const double> mu, double threshold) {
  DerivativeReport rep;
  rep.delta = delta_calibration(model, p, mu, threshold);
  const double up = cross_entropy(rescaled_model(model, 1.0 + kDerivativeStep, threshold), p, mu);
  const double down =
      cross_entropy(rescaled_model(model, 1.0 - kDerivativeStep, threshold), p, mu);
  rep.finite_difference = (up - down) / (2.0 * kDerivativeStep);
  // Signed p̂(A) - p(A).
  const auto signed_gap =
      blocked_sum<1>(mu.size(), [&](std::size_t c, std::span<CompensatedSum> acc) {
        if (mu[c] == 0.0) return;
        const auto pc = static_cast<PromptId>(c);
        for_each_group(model.row(pc), p.row(pc), {}, [&](const CellGroup& g) {
          if (g.q > threshold) acc[0].add(mu[c] * static_cast<double>(g.count) * (g.q - g.p));
        });
      })[0];
  rep.analytic_derivative = signed_gap;
  rep.agree = std::abs(std::abs(rep.finite_difference) - rep.delta) <= kDerivativeTolerance;
  return rep;
}

MultipleChoiceReport multiple_choice_bound(const ConditionalModel& model,
                                           const ConditionalModel& p,
                                           const Partition& partition,
                                           std::span<const double> mu) {
  require_same_universe(model, partition, mu);
  require_same_universe(p, partition, mu);
  for (std::size_t c = 0; c < partition.prompts(); ++c) {
    if (partition.valid_count(static_cast<PromptId>(c)) != 1) {
      throw InvalidInput("multiple-choice bound needs exactly one valid response per prompt (c" +
                         std::to_string(c) + " has " +
                         std::to_string(partition.valid_count(static_cast<PromptId>(c))) + ")");
    }
  }
  const double pe = noise_mass(p, partition, mu);
  if (pe > kProbTolerance) {
    throw NoisyTrainingDistribution("training distribution puts mass on errors");
  }
  const IIVMixture mixture(p, partition, mu);
  MultipleChoiceReport rep;
  rep.choices = mixture.stats().min_error + 1;
  rep.factor = 2.0 * (1.0 - 1.0 / static_cast<double>(rep.choices));
  rep.err = error_rate(model, partition, mu);

  const std::vector<double> ts = attained_probabilities(model);
  const std::vector<double> cerrs = misclassification_profile(model, mixture, ts);
  std::size_t best = 0;
  for (std::size_t j = 1; j < ts.size(); ++j) {
    if (cerrs[j] < cerrs[best]) best = j;
  }
  rep.best_t = ts[best];
  rep.cerr_at_best_t = cerrs[best];
  rep.max_cerr = *std::max_element(cerrs.begin(), cerrs.end());
  rep.expected_cerr = expected_misclassification_uniform_threshold(model, mixture);
  rep.holds = rep.err >= rep.factor * rep.cerr_at_best_t - kCompareTolerance;
  rep.expectation_identity_gap =
      0.5 * (1.0 / static_cast<double>(rep.choices - 1) + 1.0) * rep.err - rep.expected_cerr;
  return rep;
}

}  // namespace halluc
