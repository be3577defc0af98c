#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "halluc/rng.hpp"

using namespace halluc;

TEST_SUITE("rng") {
  TEST_CASE("mix64 is the SplitMix64 finalizer") {
    // First output of SplitMix64 seeded with 0.
    CHECK(mix64(kGoldenGamma) == 0xE220A8397B1DCDAFULL);
  }

  TEST_CASE("same seed gives the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a() == b());
    Rng c(43);
    Rng d(42);
    int same = 0;
    for (int i = 0; i < 1000; ++i) same += c() == d() ? 1 : 0;
    CHECK(same == 0);
  }

  TEST_CASE("derived seeds are distinct across streams and parents") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t parent = 0; parent < 20; ++parent) {
      for (std::uint64_t stream = 0; stream < 500; ++stream) seen.insert(derive_seed(parent, stream));
    }
    CHECK(seen.size() == 20 * 500);
    CHECK(derive_seed(1, 2) != derive_seed(2, 1));
    CHECK(Rng(7).split(3).seed() == derive_seed(7, 3));
  }

  TEST_CASE("uniform stays in [0, 1) and has the right mean") {
    Rng r(1);
    double sum = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const double u = r.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      sum += u;
    }
    // Standard error of the mean is sqrt(1/12/n) ~ 6.5e-4.
    CHECK(std::abs(sum / n - 0.5) < 5 * std::sqrt(1.0 / 12.0 / n));
    Rng s(2);
    for (int i = 0; i < 1000; ++i) {
      const double u = s.uniform_open_left();
      CHECK(u > 0.0);
      CHECK(u <= 1.0);
    }
  }

  TEST_CASE("below is unbiased over a small range") {
    Rng r(9);
    const int k = 7;
    const int n = 140000;
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      const auto v = r.below(k);
      REQUIRE(v < static_cast<std::uint64_t>(k));
      ++counts[v];
    }
    double chi2 = 0;
    const double expect = static_cast<double>(n) / k;
    for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
    // 6 degrees of freedom; P(chi2 > 22.5) ~ 1e-3.
    CHECK(chi2 < 22.5);
    CHECK(Rng(3).below(1) == 0);
  }

  TEST_CASE("between is inclusive") {
    Rng r(5);
    bool lo = false, hi = false;
    for (int i = 0; i < 2000; ++i) {
      const auto v = r.between(2, 4);
      CHECK(v >= 2);
      CHECK(v <= 4);
      lo = lo || v == 2;
      hi = hi || v == 4;
    }
    CHECK(lo);
    CHECK(hi);
  }

  TEST_CASE("exponential has unit mean") {
    Rng r(11);
    double sum = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) sum += r.exponential();
    CHECK(std::abs(sum / n - 1.0) < 5.0 / std::sqrt(n));
  }
}
