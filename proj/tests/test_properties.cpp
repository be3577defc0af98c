#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "halluc/estimators.hpp"
#include "halluc/instances.hpp"
#include "halluc/learners.hpp"
#include "halluc/rng.hpp"
#include "oracles.hpp"

using namespace halluc;

TEST_SUITE("properties") {
  TEST_CASE("main bound holds on random instances, recomputed by brute force") {
    const auto rows = verify_main_bound(1000, 101);
    REQUIRE(rows.size() == 1000);
    for (const auto& row : rows) {
      const Instance inst = random_bound_instance(row.seed);
      const oracle::Dense d = oracle::densify(inst);
      const double t = 1.0 / static_cast<double>(oracle::min_errors(d));
      const double ratio = static_cast<double>(oracle::max_valids(d)) / static_cast<double>(oracle::min_errors(d));
      const double e = oracle::err(d), c = oracle::cerr(d, t), dl = oracle::delta(d, t);
      CHECK(row.report.holds);
      CHECK(e >= 2 * c - ratio - dl - 1e-9);
      CHECK(2 * row.report.cerr <= row.report.err + row.report.ratio_term + row.report.delta + 1e-9);
      CHECK(std::abs(row.report.err - e) <= 1e-12);
      CHECK(std::abs(row.report.cerr - c) <= 1e-12);
      CHECK(std::abs(row.report.delta - dl) <= 1e-12);
    }
  }

  TEST_CASE("instances satisfy their construction invariants") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const Instance inst = random_bound_instance(derive_seed(2, seed));
      const oracle::Dense d = oracle::densify(inst);
      CHECK(d.prompts() >= 1);
      CHECK(d.prompts() <= 20);
      double total_mu = 0;
      for (std::size_t c = 0; c < d.prompts(); ++c) {
        total_mu += d.mu[c];
        CHECK(d.size(c) <= 10);
        CHECK(d.errors(c) >= 1);
        CHECK(d.valids(c) >= 1);
        long double pv = 0, qs = 0;
        for (std::size_t r = 0; r < d.size(c); ++r) {
          if (d.valid[c][r]) pv += d.p[c][r];
          qs += d.q[c][r];
          CHECK(d.q[c][r] >= 0.0);
        }
        CHECK(std::abs(static_cast<double>(pv) - 1.0) <= 1e-12);
        CHECK(std::abs(static_cast<double>(qs) - 1.0) <= 1e-12);
      }
      CHECK(std::abs(total_mu - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("multiple-choice sweep finds a threshold satisfying the bound") {
    const auto rows = verify_multiple_choice(500, 103);
    for (const auto& row : rows) {
      const Instance inst = random_multiple_choice_instance(row.seed);
      const oracle::Dense d = oracle::densify(inst);
      double best = INFINITY;
      for (double t : oracle::sweep_points(d)) best = std::min(best, oracle::cerr(d, t));
      const double choices = static_cast<double>(oracle::min_errors(d) + 1);
      CHECK(row.report.holds);
      CHECK(oracle::err(d) >= 2 * (1 - 1 / choices) * best - 1e-9);
      CHECK(std::abs(row.report.cerr_at_best_t - best) <= 1e-12);
      CHECK(row.report.expectation_identity_gap >= -1e-9);
    }
  }

  TEST_CASE("delta equals the rescaling derivative") {
    for (const auto& row : verify_delta_derivative(100, 107)) {
      CHECK(row.report.agree);
      CHECK(std::abs(std::abs(row.report.analytic_derivative) - row.report.delta) <= 1e-12);
      CHECK(std::abs(row.report.finite_difference - row.report.analytic_derivative) <= 1e-6);
    }
  }

  TEST_CASE("estimators stay in [0, 1]") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      ArbitraryFactsSpec s;
      s.n_prompts = rng.between(1, 200);
      s.response_set_size = static_cast<std::uint32_t>(rng.between(3, 20));
      s.alpha = rng.uniform();
      s.seed = seed;
      const World w = build_arbitrary_facts(s);
      const TrainingSet t = sample_training(w, rng.between(0, 300), seed);
      const auto sr = singleton_rate(t, w.abstain_token);
      const double mm = missing_mass(w, t);
      CHECK(sr.rate >= 0.0);
      CHECK(sr.rate <= 1.0);
      CHECK(mm >= 0.0);
      CHECK(mm <= 1.0 + 1e-12);
      std::vector<ItemId> items;
      for (const auto& p : t.pairs) items.push_back(p.prompt);
      const auto gt = good_turing_classic(items);
      CHECK(gt.rate >= 0.0);
      CHECK(gt.rate <= 1.0);
    }
  }

  TEST_CASE("lower bound holds for every learner, honest or not") {
    ArbitraryFactsTrialConfig c;
    c.n_prompts = 4000;
    c.response_set_size = 30;
    c.n = 3000;
    c.trials = 100;
    c.seed = 13;
    const auto all = run_arbitrary_facts_trials(c, {calibrated_memorizer, uniform_learner, oracle_learner});
    for (const auto& outcomes : all) {
      for (const auto& o : outcomes) CHECK(o.lower_holds);
    }
  }

  TEST_CASE("random sparse rows round-trip through the builder") {
    Rng rng(5);
    for (int rep = 0; rep < 200; ++rep) {
      const auto k = static_cast<std::uint32_t>(rng.between(1, 50));
      const auto explicit_cells = rng.below(k + 1);
      std::vector<ResponseId> ids(k);
      for (ResponseId r = 0; r < k; ++r) ids[r] = r;
      for (std::size_t i = k; i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
      ids.resize(explicit_cells);
      std::vector<ConditionalModel::Entry> entries;
      double mass = 0;
      for (auto id : ids) {
        const double v = rng.uniform();
        entries.push_back({id, v});
        mass += v;
      }
      const std::uint32_t rest = k - static_cast<std::uint32_t>(explicit_cells);
      double fill = 0;
      if (rest > 0) {
        const double share = rng.uniform();
        fill = share / rest;
        mass += share;
      }
      for (auto& e : entries) e.prob /= mass;
      fill /= mass;
      if (rest == 0 && entries.empty()) continue;
      ConditionalModel::Builder b;
      b.row(k, fill, entries);
      const ConditionalModel m = std::move(b).build();
      long double total = 0;
      for (ResponseId r = 0; r < k; ++r) total += m.prob(0, r);
      CHECK(std::abs(static_cast<double>(total) - 1.0) <= 1e-12);
      for (const auto& e : entries) CHECK(m.prob(0, e.response) == doctest::Approx(e.prob).epsilon(1e-12));
    }
  }
}
