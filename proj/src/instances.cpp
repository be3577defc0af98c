#include "halluc/instances.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "halluc/rng.hpp"

namespace halluc {

namespace {

std::vector<double> dirichlet(Rng& rng, std::size_t k, double floor = 0.0) {
  std::vector<double> x(k);
  double total = 0.0;
  for (double& v : x) {
    v = rng.exponential() + floor;
    total += v;
  }
  for (double& v : x) v /= total;
  return x;
}

// Normalizes in place; all-zero input becomes a point mass on index `fallback`.
void normalize(std::vector<double>& x, std::size_t fallback) {
  double total = 0.0;
  for (double v : x) total += v;
  if (total <= 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    x[fallback] = 1.0;
    return;
  }
  for (double& v : x) v /= total;
}

std::vector<double> random_mu(Rng& rng, std::size_t n) {
  if (rng.bernoulli(0.3)) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  std::vector<double> mu = dirichlet(rng, n);
  if (n > 1 && rng.bernoulli(0.4)) {
    for (double& v : mu) {
      if (rng.bernoulli(0.25)) v = 0.0;
    }
  }
  normalize(mu, rng.below(n));
  return mu;
}

std::vector<ResponseId> random_subset(Rng& rng, std::uint32_t size, std::uint32_t count) {
  std::vector<ResponseId> ids(size);
  std::iota(ids.begin(), ids.end(), ResponseId{0});
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::uint32_t>(i + rng.below(size - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// One row of a base model, given the row's valid set, reference row and the
// global threshold 1/K.
std::vector<double> random_model_row(Rng& rng, int kind, std::uint32_t size,
                                     const std::vector<ResponseId>& valid,
                                     const std::vector<double>& p_row, double threshold) {
  std::vector<double> q(size, 0.0);
  switch (kind) {
    case 0:
      q = dirichlet(rng, size);
      break;
    case 1: {  // sparse support
      const auto k = static_cast<std::uint32_t>(1 + rng.below(size));
      const auto support = random_subset(rng, size, k);
      const auto w = dirichlet(rng, k);
      for (std::uint32_t i = 0; i < k; ++i) q[support[i]] = w[i];
      break;
    }
    case 2:
      std::fill(q.begin(), q.end(), 1.0 / size);
      break;
    case 3:
      q = p_row;
      break;
    case 4: {  // perturbation of p
      const double lambda = rng.uniform() * 0.3;
      const auto noise = dirichlet(rng, size);
      for (std::uint32_t r = 0; r < size; ++r) q[r] = (1.0 - lambda) * p_row[r] + lambda * noise[r];
      break;
    }
    case 5: {  // mass piled on errors
      for (std::uint32_t r = 0; r < size; ++r) {
        const bool is_valid = std::binary_search(valid.begin(), valid.end(), r);
        q[r] = rng.exponential() * (is_valid ? 0.05 : 1.0);
      }
      normalize(q, 0);
      break;
    }
    case 6: {  // cells straddling the threshold
      double used = 0.0;
      for (std::uint32_t r = 0; r < size && used < 1.0; ++r) {
        const double eps = threshold * 1e-3 * rng.uniform();
        const double pick = rng.uniform();
        double v = pick < 0.4 ? threshold + eps : pick < 0.8 ? threshold - eps
                                                             : (pick < 0.9 ? threshold : 0.0);
        v = std::min(v, 1.0 - used);
        q[r] = v;
        used += v;
      }
      q[rng.below(size)] += std::max(0.0, 1.0 - used);
      normalize(q, 0);
      break;
    }
    default: {  // spiky
      for (double& v : q) v = std::pow(rng.uniform(), 8.0);
      normalize(q, rng.below(size));
      break;
    }
  }
  return q;
}

constexpr int kModelKinds = 8;

Instance assemble(Rng& rng, const InstanceLimits& limits, bool multiple_choice,
                  bool full_support) {
  const auto n = static_cast<std::size_t>(1 + rng.below(limits.max_prompts));
  Instance inst;
  inst.mu = random_mu(rng, n);
  std::vector<std::uint32_t> sizes(n);
  std::vector<std::vector<ResponseId>> valid(n);
  std::vector<std::vector<double>> p_rows(n);
  Partition::Builder pb(n);
  for (std::size_t c = 0; c < n; ++c) {
    sizes[c] = static_cast<std::uint32_t>(rng.between(2, limits.max_responses));
    const std::uint32_t nv =
        multiple_choice ? 1u : static_cast<std::uint32_t>(rng.between(1, sizes[c] - 1));
    valid[c] = random_subset(rng, sizes[c], nv);
    pb.row(sizes[c], valid[c]);
    std::vector<double>& row = p_rows[c];
    row.assign(sizes[c], 0.0);
    if (full_support) {
      row = dirichlet(rng, sizes[c]);
      continue;
    }
    const auto w = dirichlet(rng, nv);
    for (std::uint32_t i = 0; i < nv; ++i) row[valid[c][i]] = w[i];
    if (nv > 1 && rng.bernoulli(0.3)) {
      row[valid[c][rng.below(nv)]] = 0.0;
      normalize(row, valid[c][0]);
    }
  }
  inst.partition = std::move(pb).build();
  inst.p = ConditionalModel::dense(p_rows);

  const double threshold = default_threshold(inst.partition, inst.mu);
  const int kind = static_cast<int>(rng.below(kModelKinds));
  std::vector<std::vector<double>> q_rows(n);
  for (std::size_t c = 0; c < n; ++c) {
    if (full_support) {
      q_rows[c] = dirichlet(rng, sizes[c], 1e-3);
    } else {
      const int row_kind = rng.bernoulli(0.8) ? kind : static_cast<int>(rng.below(kModelKinds));
      q_rows[c] = random_model_row(rng, row_kind, sizes[c], valid[c], p_rows[c], threshold);
    }
  }
  inst.model = ConditionalModel::dense(q_rows);
  return inst;
}

}  // namespace

Instance random_bound_instance(std::uint64_t seed, const InstanceLimits& limits) {
  Rng rng(seed);
  return assemble(rng, limits, false, false);
}

Instance random_multiple_choice_instance(std::uint64_t seed, const InstanceLimits& limits) {
  Rng rng(seed);
  return assemble(rng, limits, true, false);
}

Instance random_full_support_instance(std::uint64_t seed, const InstanceLimits& limits) {
  Rng rng(seed);
  return assemble(rng, limits, false, true);
}

std::vector<MainBoundRow> verify_main_bound(std::size_t instances, std::uint64_t seed,
                                            Execution exec) {
  std::vector<MainBoundRow> rows(instances);
  for_each_index(
      instances,
      [&](std::size_t i) {
        const std::uint64_t s = derive_seed(seed, i);
        const Instance inst = random_bound_instance(s);
        rows[i] = {s, check_main_bound(inst.p, inst.model, inst.partition, inst.mu)};
      },
      exec);
  return rows;
}

std::vector<MultipleChoiceRow> verify_multiple_choice(std::size_t instances, std::uint64_t seed,
                                                      Execution exec) {
  std::vector<MultipleChoiceRow> rows(instances);
  for_each_index(
      instances,
      [&](std::size_t i) {
        const std::uint64_t s = derive_seed(seed, i);
        const Instance inst = random_multiple_choice_instance(s);
        rows[i] = {s, multiple_choice_bound(inst.model, inst.p, inst.partition, inst.mu)};
      },
      exec);
  return rows;
}

std::vector<DerivativeRow> verify_delta_derivative(std::size_t instances, std::uint64_t seed,
                                                   Execution exec) {
  std::vector<DerivativeRow> rows(instances);
  for_each_index(
      instances,
      [&](std::size_t i) {
        const std::uint64_t s = derive_seed(seed, i);
        const Instance inst = random_full_support_instance(s);
        Rng rng(derive_seed(s, 1));
        // Alternate between the default threshold and a threshold at an
        // arbitrary point of (0, 1).
        const double t = i % 2 == 0 ? default_threshold(inst.partition, inst.mu)
                                    : 0.05 + 0.5 * rng.uniform();
        rows[i] = {s, t, delta_derivative_check(inst.model, inst.p, inst.mu, t)};
      },
      exec);
  return rows;
}

}  // namespace halluc
