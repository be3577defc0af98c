#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace halluc {

/// Tolerance for "sums to one" checks on probability vectors.
inline constexpr double kProbTolerance = 1e-12;
/// Inputs off by more than kProbTolerance but at most this much are renormalized.
inline constexpr double kRenormTolerance = 1e-9;
/// Comparison slack for inequality checks on exact sums.
inline constexpr double kCompareTolerance = 1e-9;

/// Kahan-Babuska-Neumaier compensated accumulator.
class CompensatedSum {
 public:
  constexpr void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  constexpr CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  constexpr double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

/// How a loop over independent work items is executed. `serial` is the
/// reference path kept for testing; both give bit-identical results.
enum class Execution : std::uint8_t { serial, parallel };

/// Fixed block length for deterministic parallel reductions. Results depend
/// on this constant, never on the thread count.
inline constexpr std::size_t kReductionBlock = 8192;

/// Sum of `width` quantities over indices [0, n). `term(i, acc)` adds the
/// contribution of index i into acc (a span of `width` CompensatedSum).
/// Each block of kReductionBlock indices is summed independently and block
/// totals are combined in block order, so the result is identical for any
/// number of OpenMP threads.
template <class Term>
std::vector<double> blocked_sum(std::size_t n, std::size_t width, Term&& term,
                                Execution exec = Execution::parallel) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<double> partial(blocks * width, 0.0);
  auto run_block = [&](std::size_t b) {
    std::vector<CompensatedSum> acc(width);
    const std::size_t lo = b * kReductionBlock;
    const std::size_t hi = std::min(n, lo + kReductionBlock);
    for (std::size_t i = lo; i < hi; ++i) term(i, std::span<CompensatedSum>(acc));
    for (std::size_t k = 0; k < width; ++k) partial[b * width + k] = acc[k].value();
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks); ++b) {
      run_block(static_cast<std::size_t>(b));
    }
  } else {
    for (std::size_t b = 0; b < blocks; ++b) run_block(b);
  }
  std::vector<double> out(width, 0.0);
  for (std::size_t k = 0; k < width; ++k) {
    CompensatedSum s;
    for (std::size_t b = 0; b < blocks; ++b) s.add(partial[b * width + k]);
    out[k] = s.value();
  }
  return out;
}

template <std::size_t W, class Term>
std::array<double, W> blocked_sum(std::size_t n, Term&& term,
                                  Execution exec = Execution::parallel) {
  auto v = blocked_sum(n, W, std::forward<Term>(term), exec);
  std::array<double, W> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

/// Runs body(i) for i in [0, n). Each index must write only its own output
/// slot; ordering of side effects across indices is unspecified.
template <class Body>
void for_each_index(std::size_t n, Body&& body,
                    Execution exec = Execution::parallel) {
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

/// Three-sigma binomial allowance for "holds with probability >= 1 - gamma"
/// claims checked over `trials` independent runs.
inline double binomial_violation_limit(std::size_t trials, double gamma) noexcept {
  const double t = static_cast<double>(trials);
  return t * gamma + 3.0 * std::sqrt(t * gamma * (1.0 - gamma));
}

inline bool within_binomial_slack(std::size_t violations, std::size_t trials,
                                  double gamma) noexcept {
  return static_cast<double>(violations) <= binomial_violation_limit(trials, gamma);
}

}  // namespace halluc
