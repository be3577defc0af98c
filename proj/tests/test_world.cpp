#include <cmath>
#include <vector>

#include "doctest.h"
#include "halluc/reduction.hpp"
#include "halluc/rng.hpp"
#include "halluc/world.hpp"

using namespace halluc;

namespace {

World small_world(std::size_t n, std::uint32_t k, double alpha, std::uint64_t seed = 1) {
  ArbitraryFactsSpec s;
  s.n_prompts = n;
  s.response_set_size = k;
  s.alpha = alpha;
  s.seed = seed;
  return build_arbitrary_facts(s);
}

}  // namespace

TEST_SUITE("world") {
  TEST_CASE("one prompt, two responses: the answer is the only non-abstain response") {
    const World w = small_world(1, 2, 1.0);
    REQUIRE(w.prompts() == 1);
    CHECK(w.response_count[0] == 2);
    CHECK(w.answer[0] == 1);
    CHECK(w.abstain_token == 0);
    CHECK(w.mu[0] == 1.0);
  }

  TEST_CASE("birthday world has 364 errors per prompt") {
    const World w = small_world(50, 366, 1.0);
    const Partition part = truth_partition(w);
    for (PromptId c = 0; c < 50; ++c) {
      CHECK(part.valid_count(c) == 2);
      CHECK(part.error_count(c) == 364);
      CHECK(part.is_valid(c, w.answer[c]));
      CHECK(part.is_valid(c, w.abstain_token));
    }
  }

  TEST_CASE("same seed, same world") {
    CHECK(small_world(1000, 366, 0.7, 5) == small_world(1000, 366, 0.7, 5));
    CHECK(small_world(1000, 366, 0.7, 5).answer != small_world(1000, 366, 0.7, 6).answer);
  }

  TEST_CASE("answers are uniform over the non-abstain responses") {
    const World w = small_world(60000, 4, 1.0, 3);
    std::vector<int> counts(4, 0);
    for (auto a : w.answer) ++counts[a];
    CHECK(counts[0] == 0);
    for (int r = 1; r < 4; ++r) CHECK(std::abs(counts[r] - 20000) < 5 * std::sqrt(20000.0 * 2 / 3));
  }

  TEST_CASE("build_arbitrary_facts rejects bad input") {
    CHECK_THROWS_AS(small_world(1, 1, 1.0), InvalidInput);
    CHECK_THROWS_AS(small_world(0, 3, 1.0), InvalidInput);
    CHECK_THROWS_AS(small_world(3, 3, 1.5), InvalidInput);
    CHECK_THROWS_AS(small_world(3, 3, -0.1), InvalidInput);
    CHECK_THROWS_AS(small_world(kMaxPrompts + 1, 3, 1.0), InvalidInput);
    ArbitraryFactsSpec s;
    s.n_prompts = 3;
    s.response_set_size = 3;
    s.alpha = std::vector<double>{0.5, 0.5};
    CHECK_THROWS_AS(build_arbitrary_facts(s), InvalidInput);
    s.alpha = std::vector<double>{0.5, 0.2, 1.0};
    s.mu = {0.5, 0.25, 0.3};
    CHECK_THROWS_AS(build_arbitrary_facts(s), InvalidInput);
    s.mu = {0.5, 0.25, 0.25};
    const World w = build_arbitrary_facts(s);
    CHECK(w.alpha[1] == 0.2);
    CHECK(w.mu[2] == 0.25);
  }

  TEST_CASE("custom mu within 1e-9 of normalized is renormalized") {
    ArbitraryFactsSpec s;
    s.n_prompts = 2;
    s.response_set_size = 3;
    s.mu = {0.5 + 4e-10, 0.5};
    const World w = build_arbitrary_facts(s);
    CHECK(std::abs(w.mu[0] + w.mu[1] - 1.0) <= 1e-15);
  }

  TEST_CASE("truth partition needs three responses") {
    CHECK_THROWS_AS(truth_partition(small_world(2, 2, 1.0)), InvalidInput);
    const Partition part = truth_partition(small_world(3, 5, 1.0));
    for (PromptId c = 0; c < 3; ++c) CHECK(part.error_count(c) == 3);
  }

  TEST_CASE("training distribution boundaries and definition") {
    World w = small_world(3, 5, 1.0);
    w.alpha = {1.0, 0.0, 0.3};
    const ConditionalModel p = training_distribution(w);
    CHECK(p.prob(0, w.answer[0]) == 1.0);
    CHECK(p.prob(0, w.abstain_token) == 0.0);
    CHECK(p.prob(1, w.abstain_token) == 1.0);
    CHECK(p.prob(1, w.answer[1]) == 0.0);
    CHECK(p.prob(2, w.answer[2]) == 0.3);
    CHECK(p.prob(2, w.abstain_token) == 0.7);
    for (ResponseId r = 0; r < 5; ++r) {
      if (r != w.answer[2] && r != w.abstain_token) CHECK(p.prob(2, r) == 0.0);
    }
  }

  TEST_CASE("training distribution has no error mass") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      ArbitraryFactsSpec s;
      s.n_prompts = 40;
      s.response_set_size = static_cast<std::uint32_t>(3 + seed % 7);
      std::vector<double> alpha(40);
      for (std::size_t c = 0; c < 40; ++c) alpha[c] = static_cast<double>((c * 7 + seed) % 11) / 10.0 > 1 ? 1.0 : static_cast<double>((c * 7 + seed) % 11) / 10.0;
      s.alpha = alpha;
      s.seed = seed;
      const World w = build_arbitrary_facts(s);
      CHECK(error_rate(training_distribution(w), truth_partition(w), w.mu) == 0.0);
    }
  }

  TEST_CASE("sample_training edge cases") {
    const World w = small_world(1, 4, 1.0);
    CHECK(sample_training(w, 0, 1).size() == 0);
    const TrainingSet t = sample_training(w, 100, 2);
    REQUIRE(t.size() == 100);
    for (const auto& pair : t.pairs) {
      CHECK(pair.prompt == 0);
      CHECK(pair.response == w.answer[0]);
    }
  }

  TEST_CASE("sampling is reproducible and stays inside the world") {
    const World w = small_world(500, 10, 0.6, 4);
    const TrainingSet a = sample_training(w, 5000, 9);
    CHECK(a == sample_training(w, 5000, 9));
    CHECK(a != sample_training(w, 5000, 10));
    CHECK_NOTHROW(a.validate(w));
    TrainingSet bad = a;
    bad.pairs.push_back({500, 0});
    CHECK_THROWS_AS(bad.validate(w), InvalidInput);
  }

  TEST_CASE("prompt frequencies match mu within three binomial standard errors") {
    ArbitraryFactsSpec s;
    s.n_prompts = 5;
    s.response_set_size = 3;
    s.mu = {0.4, 0.3, 0.15, 0.1, 0.05};
    s.alpha = 0.5;
    const World w = build_arbitrary_facts(s);
    const std::size_t n = 1'000'000;
    const TrainingSet t = sample_training(w, n, 77);
    std::vector<double> counts(5, 0);
    double answered = 0;
    for (const auto& pair : t.pairs) {
      counts[pair.prompt] += 1;
      answered += pair.response != w.abstain_token ? 1 : 0;
    }
    for (std::size_t c = 0; c < 5; ++c) {
      const double se = std::sqrt(n * s.mu[c] * (1 - s.mu[c]));
      CHECK(std::abs(counts[c] - n * s.mu[c]) <= 3 * se);
    }
    CHECK(std::abs(answered - 0.5 * n) <= 3 * std::sqrt(n * 0.25));
  }

  TEST_CASE("uniform mu detection") {
    CHECK(small_world(7, 3, 1.0).uniform_mu());
    ArbitraryFactsSpec s;
    s.n_prompts = 2;
    s.response_set_size = 3;
    s.mu = {0.25, 0.75};
    CHECK_FALSE(build_arbitrary_facts(s).uniform_mu());
  }

  TEST_CASE("model rows: sparse fill, dense view and validation") {
    ConditionalModel::Builder b;
    b.row(5, 0.1, {{3, 0.5}, {0, 0.2}});
    b.dense_row(std::vector<double>{0.5, 0.5});
    const ConditionalModel m = std::move(b).build();
    CHECK(m.prompts() == 2);
    CHECK(m.prob(0, 0) == 0.2);
    CHECK(m.prob(0, 1) == 0.1);
    CHECK(m.prob(0, 3) == 0.5);
    CHECK(m.dense_row(0) == std::vector<double>{0.2, 0.1, 0.1, 0.5, 0.1});
    CHECK(m.row(0).implicit_count() == 3);

    ConditionalModel::Builder bad;
    CHECK_THROWS_AS(bad.row(3, 0.0, {{0, 0.5}, {1, 0.4}}), InvalidInput);
    CHECK_THROWS_AS(bad.row(3, 0.0, {{0, 0.5}, {0, 0.5}}), InvalidInput);
    CHECK_THROWS_AS(bad.row(3, 0.0, {{3, 1.0}}), InvalidInput);
    CHECK_THROWS_AS(bad.row(3, 0.0, {{0, -0.5}, {1, 1.5}}), InvalidInput);
    CHECK_THROWS_AS(bad.row(0, 0.0, {}), InvalidInput);
  }

  TEST_CASE("model rows within 1e-9 are renormalized, exact rows kept") {
    const ConditionalModel m = ConditionalModel::dense({{0.5, 0.5 + 5e-10}, {0.25, 0.75}});
    CHECK(std::abs(m.prob(0, 0) + m.prob(0, 1) - 1.0) < 1e-15);
    CHECK(m.prob(1, 0) == 0.25);
    CHECK_THROWS_AS(ConditionalModel::dense({{0.5, 0.5 + 2e-9}}), InvalidInput);
  }

  TEST_CASE("normalize_distribution") {
    std::vector<double> a{0.2, 0.8};
    CHECK_NOTHROW(normalize_distribution(a, "a"));
    CHECK(a[0] == 0.2);
    std::vector<double> b{0.2, 0.8 + 1e-10};
    normalize_distribution(b, "b");
    CHECK(std::abs(b[0] + b[1] - 1.0) < 1e-15);
    std::vector<double> c{0.2, 0.9};
    CHECK_THROWS_AS(normalize_distribution(c, "c"), InvalidInput);
    std::vector<double> d{-0.1, 1.1};
    CHECK_THROWS_AS(normalize_distribution(d, "d"), InvalidInput);
  }

  TEST_CASE("partition rows") {
    Partition::Builder b;
    b.row(4, {2, 0});
    const Partition p = std::move(b).build();
    CHECK(p.valid(0)[0] == 0);
    CHECK(p.valid(0)[1] == 2);
    CHECK(p.error_count(0) == 2);
    CHECK_FALSE(p.is_valid(0, 1));
    Partition::Builder bad;
    CHECK_THROWS_AS(bad.row(3, {}), InvalidInput);
    CHECK_THROWS_AS(bad.row(2, {0, 1}), InvalidInput);
    CHECK_THROWS_AS(bad.row(2, {2}), InvalidInput);
    CHECK_THROWS_AS(bad.row(3, {1, 1}), InvalidInput);
  }

  TEST_CASE("alias sampler reproduces its weights") {
    const std::vector<double> w{0.5, 0.0, 0.3, 0.2};
    const AliasSampler s(w);
    Rng rng(8);
    std::vector<double> counts(4, 0);
    const int n = 400000;
    for (int i = 0; i < n; ++i) counts[s(rng)] += 1;
    CHECK(counts[1] == 0);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(counts[i] - n * w[i]) <= 4 * std::sqrt(n * w[i] * (1 - w[i])) + 1e-9);
    }
  }

  TEST_CASE("cell groups cover every response exactly once") {
    ConditionalModel::Builder qb, pb;
    qb.row(10, 0.05, {{1, 0.3}, {7, 0.3}});
    pb.row(10, 0.0, {{0, 0.4}, {7, 0.6}});
    const ConditionalModel q = std::move(qb).build();
    const ConditionalModel p = std::move(pb).build();
    const std::vector<ResponseId> valid{0, 4};
    std::uint32_t cells = 0, valid_cells = 0;
    double qmass = 0, pmass = 0;
    for_each_group(q.row(0), p.row(0), valid, [&](const CellGroup& g) {
      cells += g.count;
      valid_cells += g.valid;
      qmass += g.q * g.count;
      pmass += g.p * g.count;
      if (g.count == 1) CHECK(g.q == q.prob(0, g.first));
    });
    CHECK(cells == 10);
    CHECK(valid_cells == 2);
    CHECK(qmass == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pmass == doctest::Approx(1.0).epsilon(1e-14));
  }
}
