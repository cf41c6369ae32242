#include "emprox/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emprox/errors.hpp"

namespace emprox {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, std::size_t min_size) {
  if (a.size() != b.size()) {
    throw InputError("length mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.size() < min_size) {
    throw InputError("need at least " + std::to_string(min_size) + " values, got " +
                     std::to_string(a.size()));
  }
}

bool constant(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

// Number of pairs within runs of equal values of an already sorted range.
template <class It, class Eq>
std::int64_t tied_pairs(It first, It last, Eq eq) {
  std::int64_t total = 0;
  while (first != last) {
    It run_end = std::next(first);
    while (run_end != last && eq(*first, *run_end)) ++run_end;
    const auto len = static_cast<std::int64_t>(std::distance(first, run_end));
    total += len * (len - 1) / 2;
    first = run_end;
  }
  return total;
}

// Sorts v[lo, hi) ascending; returns the number of strict inversions.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo,
                         std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(s / static_cast<double>(pred.size()));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2);
  if (constant(x) || constant(y)) throw UndefinedCorrelationError("correlation of a constant input");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    // positions i..j-1 (0-based) -> mean 1-based rank
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2);
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, 2);
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  KendallCounts c;
  c.pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  c.ties_x = tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const std::int64_t joint = tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] == x[b] && y[a] == y[b];
  });

  std::vector<double> ys(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::int64_t swaps = merge_count(ys, tmp, 0, n);
  c.ties_y = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

  // Knight: C - D = n0 - n1 - n2 + n3 - 2 * swaps
  c.concordant_minus_discordant = c.pairs - c.ties_x - c.ties_y + joint - 2 * swaps;
  return c;
}

double tau_b(const KendallCounts& c) {
  const std::int64_t fx = c.pairs - c.ties_x;
  const std::int64_t fy = c.pairs - c.ties_y;
  if (fx == 0 || fy == 0) throw UndefinedCorrelationError("all pairs tied in one variable");
  const double tau = static_cast<double>(c.concordant_minus_discordant) /
                     std::sqrt(static_cast<double>(fx) * static_cast<double>(fy));
  return std::clamp(tau, -1.0, 1.0);
}

double kendall(std::span<const double> x, std::span<const double> y) {
  return tau_b(kendall_counts(x, y));
}

MetricReport score_predictions(std::span<const double> pred, std::span<const double> truth) {
  MetricReport r;
  r.mae = mae(pred, truth);
  r.rmse = rmse(pred, truth);
  r.pearson = pearson(pred, truth);
  r.spearman = spearman(pred, truth);
  r.kendall = kendall(pred, truth);
  return r;
}

}  // namespace emprox
