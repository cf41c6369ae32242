#pragma once

// Repeated-trial evaluation: sample a 121/100 train/test split, fit, query
// every test architecture, score the predictions, aggregate mean and sample
// standard deviation over trials.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emprox/benchdata.hpp"
#include "emprox/metrics.hpp"
#include "emprox/predictor.hpp"

namespace emprox {

class Surrogate {
 public:
  virtual ~Surrogate() = default;
  virtual double predict(const Architecture& arch) const = 0;
  virtual std::vector<std::string> warnings() const { return {}; }
};

using SurrogateFactory =
    std::function<std::unique_ptr<Surrogate>(std::span<const BenchmarkRecord> train, std::uint64_t seed)>;

// Factory producing fitted Predictors; `seed` overrides cfg.model.seed.
SurrogateFactory emprox_factory(PredictorConfig cfg);

struct TrialSpec {
  const BenchmarkTable* benchmark = nullptr;
  std::size_t n_train = 121;
  std::size_t n_test = 100;
  PredictorConfig predictor;
  std::uint64_t seed = 0;
};

struct TrialOutcome {
  std::uint64_t seed = 0;
  std::optional<MetricReport> report;  // empty when skipped
  std::string skip_reason;
  std::vector<std::string> warnings;

  bool skipped() const noexcept { return !report.has_value(); }
};

// Undefined correlations (e.g. constant predictions) mark the trial skipped.
TrialOutcome run_trial(const TrialSpec& spec, const SurrogateFactory& factory);
TrialOutcome run_trial(const TrialSpec& spec);

enum class Metric { Mae, Rmse, Pearson, Spearman, Kendall, FitTime, QueryTime };
inline constexpr Metric kAllMetrics[] = {Metric::Mae,      Metric::Rmse,    Metric::Pearson, Metric::Spearman,
                                         Metric::Kendall,  Metric::FitTime, Metric::QueryTime};
const char* metric_name(Metric m);
double metric_value(const MetricReport& r, Metric m);
bool is_time_metric(Metric m);

struct EvalReport {
  std::string label;
  std::size_t k = 0;
  std::size_t d = 0;
  std::uint64_t base_seed = 0;
  std::size_t n_trials = 0;
  std::vector<TrialOutcome> trials;
  std::size_t skipped = 0;
  MetricReport mean;
  MetricReport stddev;  // sample (n-1); zero when only one trial counted
  bool single_trial_std = false;
};

// Mean and sample standard deviation over the non-skipped trials.
// InputError if every trial was skipped.
void aggregate(EvalReport& report);

// Trials use seeds base_seed + 0 .. n_trials - 1 and may run on `jobs` threads;
// results do not depend on `jobs`.
EvalReport run_experiment(const TrialSpec& spec_template, std::size_t n_trials, std::uint64_t base_seed,
                          std::size_t jobs = 1);
EvalReport run_experiment(const TrialSpec& spec_template, std::size_t n_trials, std::uint64_t base_seed,
                          std::size_t jobs, const SurrogateFactory& factory);

struct GridCell {
  std::size_t k = 0;
  std::size_t d = 0;
  std::optional<EvalReport> report;
  std::string error;
};

// One experiment per (k, d), k-major. Failures are recorded per cell.
std::vector<GridCell> grid_search(std::span<const std::size_t> ks, std::span<const std::size_t> ds,
                                  const TrialSpec& spec_template, std::size_t n_trials,
                                  std::uint64_t base_seed, std::size_t jobs = 1);

// Full per-trial detail.
std::string report_to_json(std::span<const EvalReport> reports);
std::string grid_to_json(std::span<const GridCell> cells);

// One row per report: method,MAE,RMSE,Pearson,Spearman,Kendall,FitTime,QueryTime
// with each cell as mean±std (17 significant digits). The method label is quoted.
std::string report_to_csv(std::span<const EvalReport> reports);
// k,d,MAE,...,QueryTime with mean±std cells; failed cells carry the error.
std::string grid_to_csv(std::span<const GridCell> cells);

// Fixed-width human-readable table with 4 decimals.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace emprox
