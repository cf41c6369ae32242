#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace emprox {

// Both inputs must be non-empty and of equal length; otherwise InputError.
double mae(std::span<const double> pred, std::span<const double> truth);
double rmse(std::span<const double> pred, std::span<const double> truth);

// Sample Pearson r. UndefinedCorrelationError when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);

// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

struct KendallCounts {
  std::int64_t pairs = 0;         // n(n-1)/2
  std::int64_t ties_x = 0;        // pairs tied in x (including joint ties)
  std::int64_t ties_y = 0;        // pairs tied in y (including joint ties)
  std::int64_t concordant_minus_discordant = 0;
};

// O(n log n) pair statistics (merge-sort inversion count).
KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y);

// (C - D) / sqrt((n0 - T_x)(n0 - T_y)). UndefinedCorrelationError if either
// factor is zero.
double tau_b(const KendallCounts& counts);

// Kendall tau-b.
double kendall(std::span<const double> x, std::span<const double> y);

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  double pearson = 0.0;
  double spearman = 0.0;
  double kendall = 0.0;
  double fit_time_s = 0.0;
  double query_time_s = 0.0;  // mean seconds per single query
};

// Fills the five accuracy metrics; times are left at zero.
MetricReport score_predictions(std::span<const double> pred, std::span<const double> truth);

// Wall-clock duration of `fn()` on the monotonic clock.
template <class Fn>
auto time_section(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
    std::forward<Fn>(fn)();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  } else {
    auto result = std::forward<Fn>(fn)();
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::pair<decltype(result), double>{std::move(result), seconds};
  }
}

// Accumulates labelled durations (fit, per-query, ...).
class Stopwatch {
 public:
  void add(double seconds) {
    total_ += seconds;
    ++count_;
  }
  double total() const noexcept { return total_; }
  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return count_ == 0 ? 0.0 : total_ / static_cast<double>(count_); }

 private:
  double total_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace emprox
