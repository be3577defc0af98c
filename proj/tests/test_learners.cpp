#include <cmath>
#include <vector>

#include "doctest.h"
#include "halluc/estimators.hpp"
#include "halluc/learners.hpp"
#include "halluc/rng.hpp"
#include "oracles.hpp"

using namespace halluc;

namespace {

World facts(std::size_t n, std::uint32_t k, double alpha, std::uint64_t seed = 0) {
  ArbitraryFactsSpec s;
  s.n_prompts = n;
  s.response_set_size = k;
  s.alpha = alpha;
  s.seed = seed;
  return build_arbitrary_facts(s);
}

// Training set answering every prompt once.
TrainingSet answer_all(const World& w) {
  TrainingSet t;
  for (std::size_t c = 0; c < w.prompts(); ++c) t.pairs.push_back({static_cast<PromptId>(c), w.answer[c]});
  return t;
}

// Σ over unseen prompts and every error cell of μ p̂, cell by cell.
long double brute_memorizer_error(const World& w, const TrainingSet& t) {
  const ConditionalModel q = calibrated_memorizer(w, t);
  const Partition part = truth_partition(w);
  return oracle::err(oracle::densify(training_distribution(w), q, part, w.mu));
}

}  // namespace

TEST_SUITE("learners") {
  TEST_CASE("memorizer with nothing unseen reproduces the training distribution") {
    const World w = facts(20, 9, 0.65, 1);
    const TrainingSet t = answer_all(w);
    const ConditionalModel q = calibrated_memorizer(w, t);
    const ConditionalModel p = training_distribution(w);
    for (PromptId c = 0; c < 20; ++c) {
      for (ResponseId r = 0; r < 9; ++r) CHECK(q.prob(c, r) == p.prob(c, r));
    }
    CHECK(error_rate(q, truth_partition(w), w.mu) == 0.0);
    CHECK(memorizer_error(w, t) == 0.0);
  }

  TEST_CASE("unseen prompt spreads its answer mass over the non-abstain responses") {
    // 366 dates plus the abstain token.
    const World w = facts(1, 367, 1.0, 2);
    const ConditionalModel q = calibrated_memorizer(w, TrainingSet{});
    CHECK(q.prob(0, w.abstain_token) == 0.0);
    for (ResponseId r = 1; r < 367; ++r) CHECK(q.prob(0, r) == 1.0 / 366.0);

    const World v = facts(1, 366, 0.5, 2);
    const ConditionalModel h = calibrated_memorizer(v, TrainingSet{});
    CHECK(h.prob(0, v.abstain_token) == 0.5);
    CHECK(h.prob(0, v.answer[0]) == 0.5 / 365.0);
  }

  TEST_CASE("single unseen birthday prompt errs with probability 364/365") {
    const World w = facts(1, 366, 1.0, 3);
    CHECK(memorizer_error(w, TrainingSet{}) == doctest::Approx(364.0 / 365.0).epsilon(1e-15));
    CHECK(static_cast<double>(brute_memorizer_error(w, TrainingSet{})) ==
          doctest::Approx(364.0 / 365.0).epsilon(1e-15));
  }

  TEST_CASE("abstain-only observations leave a prompt unseen") {
    const World w = facts(2, 5, 0.5, 4);
    const TrainingSet t{{{0, w.abstain_token}, {1, w.answer[1]}}};
    const ConditionalModel q = calibrated_memorizer(w, t);
    CHECK(q.prob(0, w.answer[0]) == 0.5 / 4.0);
    CHECK(q.prob(1, w.answer[1]) == 0.5);
    CHECK(memorizer_error(w, t) == doctest::Approx(0.5 * 0.5 * 3.0 / 4.0));
  }

  TEST_CASE("closed-form memorizer error matches exhaustive summation on random worlds") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(derive_seed(31, seed));
      ArbitraryFactsSpec s;
      s.n_prompts = rng.between(1, 40);
      s.response_set_size = static_cast<std::uint32_t>(rng.between(3, 30));
      std::vector<double> alpha(s.n_prompts), mu(s.n_prompts);
      double total = 0;
      for (std::size_t c = 0; c < s.n_prompts; ++c) {
        alpha[c] = rng.below(4) == 0 ? 1.0 : rng.uniform();
        mu[c] = rng.exponential();
        total += mu[c];
      }
      for (double& m : mu) m /= total;
      s.alpha = alpha;
      s.mu = mu;
      s.seed = seed;
      const World w = build_arbitrary_facts(s);
      const TrainingSet t = sample_training(w, rng.between(0, 60), seed);
      const ConditionalModel q = calibrated_memorizer(w, t);
      const double closed = memorizer_error(w, t);
      CHECK(std::abs(closed - error_rate(q, truth_partition(w), w.mu)) <= 1e-12);
      CHECK(std::abs(closed - static_cast<double>(brute_memorizer_error(w, t))) <= 1e-12);

      // The memorizer is calibrated at every threshold.
      const auto zs = attained_probabilities(q);
      for (double d : delta_profile(q, training_distribution(w), w.mu, zs)) CHECK(d <= 1e-12);
    }
  }

  TEST_CASE("learner registry") {
    CHECK(parse_learner("memorizer") == LearnerKind::memorizer);
    CHECK(parse_learner("uniform") == LearnerKind::uniform);
    CHECK(parse_learner("oracle") == LearnerKind::oracle);
    CHECK_THROWS_AS(parse_learner("nope"), InvalidInput);
    CHECK(to_string(LearnerKind::oracle) == "oracle");
    const World w = facts(3, 4, 1.0);
    CHECK(learner_for(LearnerKind::oracle)(w, TrainingSet{}) == training_distribution(w));
    CHECK(learner_for(LearnerKind::uniform)(w, TrainingSet{}) == ConditionalModel::uniform(w.response_count));
  }

  TEST_CASE("bound right-hand sides") {
    const double lower = arbitrary_facts_lower_rhs(0.8, 364, 1'000'000, 0.0);
    CHECK(lower == doctest::Approx(0.8 - 2.0 / 364.0 - (35.0 + 6.0 * std::log(1e6)) / 1000.0));
    CHECK(arbitrary_facts_upper_rhs(0.8, 364, 1'000'000) == doctest::Approx(0.8 - 0.8 / 365.0 + 0.013));
    CHECK((35.0 + 6.0 * std::log(100.0)) / 10.0 > 1.0);
  }

  TEST_CASE("trial harness at a small configuration") {
    ArbitraryFactsTrialConfig c;
    c.n_prompts = 3000;
    c.response_set_size = 12;
    c.n = 2000;
    c.trials = 100;
    c.seed = 5;
    c.check_delta_z = true;
    const auto outcomes = run_arbitrary_facts_trials(c, calibrated_memorizer);
    REQUIRE(outcomes.size() == 100);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const TrialOutcome& o = outcomes[i];
      CHECK(o.seed == derive_seed(5, i));
      CHECK(o.max_delta_z <= 1e-12);
      CHECK(o.sr >= 0.0);
      CHECK(o.sr <= 1.0);
      CHECK(o.lower_bound_rhs == doctest::Approx(arbitrary_facts_lower_rhs(o.sr, 10, 2000, o.delta)));
      CHECK(o.upper_bound_rhs == doctest::Approx(arbitrary_facts_upper_rhs(o.sr, 10, 2000)));
      CHECK(o.lower_vacuous);
    }
    // Recompute one trial by hand.
    const std::uint64_t ts = derive_seed(5, 7);
    ArbitraryFactsSpec s;
    s.n_prompts = 3000;
    s.response_set_size = 12;
    s.seed = derive_seed(ts, 0);
    const World w = build_arbitrary_facts(s);
    const TrainingSet t = sample_training(w, 2000, derive_seed(ts, 1));
    CHECK(outcomes[7].sr == singleton_rate(t, w.abstain_token).rate);
    CHECK(outcomes[7].err == memorizer_error(w, t));

    const TrialSummary sum = summarize(outcomes);
    CHECK(sum.trials == 100);
    CHECK(sum.lower_pass);
    CHECK(sum.upper_pass);
    CHECK(sum.vacuous_lower == 100);
    CHECK(sum.allowed_violations == doctest::Approx(1.0 + 3.0 * std::sqrt(0.99)));
  }

  TEST_CASE("several learners share trials") {
    ArbitraryFactsTrialConfig c;
    c.n_prompts = 500;
    c.response_set_size = 6;
    c.n = 400;
    c.trials = 100;
    c.seed = 9;
    const std::vector<Learner> ls{calibrated_memorizer, uniform_learner, oracle_learner};
    const auto all = run_arbitrary_facts_trials(c, ls);
    REQUIRE(all.size() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
      const auto single = run_arbitrary_facts_trials(c, ls[j]);
      for (std::size_t i = 0; i < c.trials; ++i) {
        CHECK(all[j][i].err == single[i].err);
        CHECK(all[j][i].delta == single[i].delta);
        CHECK(all[j][i].sr == single[i].sr);
      }
    }
    for (const auto& o : all[2]) CHECK(o.err == 0.0);
  }

  TEST_CASE("trial harness input checks and vacuity") {
    ArbitraryFactsTrialConfig c;
    c.n_prompts = 200;
    c.response_set_size = 6;
    c.n = 100;
    c.trials = 99;
    CHECK_THROWS_AS(run_arbitrary_facts_trials(c, calibrated_memorizer), InvalidInput);
    c.trials = 100;
    c.response_set_size = 2;
    CHECK_THROWS_AS(run_arbitrary_facts_trials(c, calibrated_memorizer), InvalidInput);
    c.response_set_size = 6;
    c.n = 0;
    CHECK_THROWS_AS(run_arbitrary_facts_trials(c, calibrated_memorizer), InvalidInput);
    c.n = 100;
    for (const auto& o : run_arbitrary_facts_trials(c, calibrated_memorizer)) {
      CHECK(o.lower_vacuous);
      CHECK(o.lower_holds);
      CHECK(o.lower_bound_rhs < 0.0);
    }
  }

  TEST_CASE("trigram universe") {
    const TrigramUniverse u = trigram_world();
    const IIVMixture mix(u.p, u.partition, u.mu);
    const FamilyOptimum opt = family_optimum(u.trigram_family, mix);
    CHECK(u.trigram_family.size() == 4);
    CHECK(opt.opt == 0.5);
    for (double e : opt.per_member) CHECK(e >= 0.5);
    for (int i = 0; i <= 20; ++i) {
      const double a = i / 20.0;
      CHECK(error_rate(trigram_model(a), u.partition, u.mu) >= 0.5 - 1e-9);
    }
    const auto full_context = [&](PromptId c, ResponseId r) { return u.partition.is_valid(c, r); };
    CHECK(misclassification(full_context, mix) == 0.0);
    CHECK_THROWS_AS(trigram_model(1.5), InvalidInput);
    CHECK_THROWS_AS(family_optimum(ClassifierFamily{}, mix), InvalidInput);
  }

  TEST_CASE("pad world with 101 messages") {
    const CryptoWorld cw = crypto_world(101, 3);
    CHECK(cw.world.prompts() == 100);
    const auto st = partition_stats(cw.partition, cw.world.mu);
    CHECK(st.min_error == 99);
    const DecryptionCheck d = check_decryption_bound(cw, cw.uniform_baseline);
    CHECK(d.err == doctest::Approx(99.0 / 101.0).epsilon(1e-14));
    CHECK(d.err >= 0.98);
    CHECK(d.beta == 0.0);
    CHECK(d.delta == 0.0);
    CHECK(d.bound == doctest::Approx(1.0 - 2.0 / 99.0));
    CHECK(d.holds);
    for (double t : attained_probabilities(cw.uniform_baseline)) {
      CHECK(delta_calibration(cw.uniform_baseline, cw.p, cw.world.mu, t) == 0.0);
    }
  }

  TEST_CASE("pad world is a bijection") {
    const CryptoWorld cw = crypto_world(50, 8);
    std::vector<bool> hit(50, false);
    for (auto a : cw.world.answer) {
      CHECK(a != 0);
      CHECK_FALSE(hit[a]);
      hit[a] = true;
    }
    CHECK(crypto_world(50, 8).world == cw.world);
    CHECK_THROWS_AS(crypto_world(2, 0), InvalidInput);
  }

  TEST_CASE("low error on the pad world needs a good classifier or miscalibration") {
    const CryptoWorld cw = crypto_world(21, 4);
    Rng rng(12);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<std::vector<double>> rows;
      for (std::size_t c = 0; c < cw.world.prompts(); ++c) {
        std::vector<double> row(21);
        double total = 0;
        for (double& v : row) {
          v = rng.below(3) == 0 ? 0.0 : rng.exponential();
          total += v;
        }
        if (total == 0) {
          row[0] = 1;
          total = 1;
        }
        for (double& v : row) v /= total;
        rows.push_back(row);
      }
      const DecryptionCheck d = check_decryption_bound(cw, ConditionalModel::dense(rows));
      CHECK(d.holds);
      if (d.err < d.bound) CHECK(d.beta + d.delta > 1.0 - 2.0 / 19.0 - d.err - 1e-9);
    }
    const DecryptionCheck o = check_decryption_bound(cw, cw.p);
    CHECK(o.err == 0.0);
    CHECK(o.beta == 1.0);
    CHECK(o.holds);
  }
}
