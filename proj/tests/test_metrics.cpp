#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "emprox/errors.hpp"
#include "emprox/metrics.hpp"
#include "oracles.hpp"

using namespace emprox;
using V = std::vector<double>;

TEST(Mae, Examples) {
  EXPECT_EQ(mae(V{1, 2, 3}, V{1, 2, 3}), 0.0);
  EXPECT_NEAR(mae(V{1, 2, 3}, V{2, 2, 5}), 1.0, 1e-12);
  EXPECT_THROW(mae(V{}, V{}), InputError);
  EXPECT_THROW(mae(V{1}, V{1, 2}), InputError);
}

TEST(Rmse, Examples) {
  EXPECT_EQ(rmse(V{4, 5}, V{4, 5}), 0.0);
  EXPECT_NEAR(rmse(V{0, 0}, V{3, 4}), std::sqrt(12.5), 1e-12);
  EXPECT_NEAR(rmse(V{2}, V{-1.5}), 3.5, 1e-12);
  EXPECT_NEAR(mae(V{2}, V{-1.5}), 3.5, 1e-12);
}

TEST(Rmse, NeverBelowMae) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> n(0, 5);
  for (int i = 0; i < 1000; ++i) {
    V a(1 + i % 17), b(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      a[j] = n(g);
      b[j] = n(g);
    }
    EXPECT_LE(mae(a, b), rmse(a, b) + 1e-12);
  }
}

TEST(Pearson, Examples) {
  const V x{1, 2, 3, 4, 5};
  V y, z;
  for (double v : x) {
    y.push_back(2 * v + 1);
    z.push_back(-v);
  }
  EXPECT_NEAR(pearson(x, y), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, z), -1.0, 1e-12);
  EXPECT_NEAR(pearson(V{1, 2, 3, 4}, V{1, 3, 2, 4}), 0.8, 1e-12);
  EXPECT_THROW(pearson(V{1, 1, 1}, V{1, 2, 3}), UndefinedCorrelationError);
  EXPECT_THROW(pearson(V{1, 2, 3}, V{7, 7, 7}), UndefinedCorrelationError);
}

TEST(Spearman, Examples) {
  const V x{0.3, 1.5, -2, 8, 4};
  V cubed, rev;
  for (double v : x) cubed.push_back(v * v * v + 3);
  EXPECT_NEAR(spearman(x, cubed), 1.0, 1e-12);
  EXPECT_NEAR(spearman(V{1, 2, 3, 4}, V{9, 7, 5, 1}), -1.0, 1e-12);
  EXPECT_EQ(average_ranks(V{1, 2, 2, 4}), (V{1, 2.5, 2.5, 4}));
  EXPECT_EQ(average_ranks(V{3, 1, 3, 3}), (V{3, 1, 3, 3}));
}

TEST(Kendall, Examples) {
  EXPECT_NEAR(kendall(V{1, 2, 3}, V{1, 3, 2}), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(kendall(V{4, 1, 9, 2}, V{4, 1, 9, 2}), 1.0, 1e-12);
  EXPECT_THROW(kendall(V{1, 1}, V{1, 2}), UndefinedCorrelationError);
}

TEST(Kendall, MatchesPairCountingOracleWithTies) {
  std::mt19937_64 g(2);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(i % 60);
    std::uniform_int_distribution<int> level(0, 1 + i % 7);
    V x(n), y(n);
    for (std::size_t j = 0; j < n; ++j) {
      x[j] = level(g);
      y[j] = level(g);
    }
    double want;
    try {
      want = oracle::kendall_tau_b(x, y);
      if (!std::isfinite(want)) throw UndefinedCorrelationError("degenerate");
    } catch (...) {
      EXPECT_THROW(kendall(x, y), UndefinedCorrelationError);
      continue;
    }
    EXPECT_EQ(kendall(x, y), want) << "instance " << i;
  }
}

TEST(Kendall, CountsAgreeWithDirectEnumeration) {
  const V x{1, 1, 2, 3, 3, 3};
  const V y{2, 1, 1, 3, 3, 0};
  const auto c = kendall_counts(x, y);
  EXPECT_EQ(c.pairs, 15);
  EXPECT_EQ(c.ties_x, 4);
  EXPECT_EQ(c.ties_y, 2);
  std::int64_t s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double p = (x[i] - x[j]) * (y[i] - y[j]);
      s += p > 0 ? 1 : p < 0 ? -1 : 0;
    }
  }
  EXPECT_EQ(c.concordant_minus_discordant, s);
}

TEST(Score, FillsAccuracyMetricsOnly) {
  const V truth{60, 70, 80, 90};
  const auto r = score_predictions(truth, truth);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_NEAR(r.pearson, 1.0, 1e-12);
  EXPECT_NEAR(r.spearman, 1.0, 1e-12);
  EXPECT_NEAR(r.kendall, 1.0, 1e-12);
  EXPECT_EQ(r.fit_time_s, 0.0);
  EXPECT_EQ(r.query_time_s, 0.0);
}

TEST(Timing, NonNegativeAndCheapNoOp) {
  const double t = time_section([] {});
  EXPECT_GE(t, 0.0);
  EXPECT_LT(t, 1e-3);
  auto [value, s] = time_section([] { return 42; });
  EXPECT_EQ(value, 42);
  EXPECT_GE(s, 0.0);
  const double slept = time_section([] { std::this_thread::sleep_for(std::chrono::milliseconds(5)); });
  EXPECT_GE(slept, 0.004);
}

TEST(Timing, StopwatchMeanIsSumOverCount) {
  Stopwatch w;
  EXPECT_EQ(w.mean(), 0.0);
  const V parts{0.5, 0.25, 1.0};
  for (double p : parts) w.add(p);
  EXPECT_EQ(w.count(), 3u);
  EXPECT_NEAR(w.total(), 1.75, 1e-15);
  EXPECT_NEAR(w.mean(), 1.75 / 3, 1e-15);
}
