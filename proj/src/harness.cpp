#include "emprox/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "emprox/errors.hpp"
#include "emprox/rng.hpp"
#include "json.hpp"

namespace emprox {

namespace {

class EmProxSurrogate final : public Surrogate {
 public:
  explicit EmProxSurrogate(Predictor p) : predictor_(std::move(p)) {}

  double predict(const Architecture& arch) const override {
    QueryResult r = predictor_.query(arch);
    if (r.warning) query_warnings_.push_back(std::move(*r.warning));
    return r.accuracy;
  }

  std::vector<std::string> warnings() const override {
    std::vector<std::string> out = predictor_.warnings();
    out.insert(out.end(), query_warnings_.begin(), query_warnings_.end());
    return out;
  }

 private:
  Predictor predictor_;
  mutable std::vector<std::string> query_warnings_;
};

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json metrics_json(const MetricReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (Metric m : kAllMetrics) j[metric_name(m)] = metric_value(r, m);
  return j;
}

nlohmann::json eval_json(const EvalReport& r) {
  nlohmann::json agg = nlohmann::json::object();
  for (Metric m : kAllMetrics) {
    agg[metric_name(m)] = {{"mean", metric_value(r.mean, m)}, {"std", metric_value(r.stddev, m)}};
  }
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) {
    nlohmann::json jt = {{"seed", t.seed}, {"skipped", t.skipped()}, {"warnings", t.warnings}};
    if (t.report) {
      jt["metrics"] = metrics_json(*t.report);
    } else {
      jt["skip_reason"] = t.skip_reason;
    }
    trials.push_back(std::move(jt));
  }
  return {{"label", r.label},
          {"k", r.k},
          {"d", r.d},
          {"base_seed", r.base_seed},
          {"n_trials", r.n_trials},
          {"skipped", r.skipped},
          {"single_trial_std", r.single_trial_std},
          {"aggregate", std::move(agg)},
          {"trials", std::move(trials)}};
}

std::string csv_cells(const EvalReport& r) {
  std::string out;
  for (Metric m : kAllMetrics) {
    out += ',';
    out += format17(metric_value(r.mean, m));
    out += "\xC2\xB1";  // ±
    out += format17(metric_value(r.stddev, m));
  }
  return out;
}

std::string csv_header() {
  std::string h;
  for (Metric m : kAllMetrics) {
    h += ',';
    h += metric_name(m);
  }
  return h;
}

}  // namespace

SurrogateFactory emprox_factory(PredictorConfig cfg) {
  return [cfg](std::span<const BenchmarkRecord> train, std::uint64_t seed) -> std::unique_ptr<Surrogate> {
    PredictorConfig c = cfg;
    c.model.seed = seed;
    return std::make_unique<EmProxSurrogate>(Predictor::fit(train, c));
  };
}

TrialOutcome run_trial(const TrialSpec& spec, const SurrogateFactory& factory) {
  if (spec.benchmark == nullptr) throw InputError("trial has no benchmark table");
  TrialOutcome out;
  out.seed = spec.seed;
  const Split split = sample_split(*spec.benchmark, spec.n_train, spec.n_test, derive_seed(spec.seed, 1));

  auto [model, fit_seconds] = time_section([&] { return factory(split.train, derive_seed(spec.seed, 2)); });

  std::vector<double> pred, truth;
  pred.reserve(split.test.size());
  truth.reserve(split.test.size());
  Stopwatch queries;
  for (const auto& rec : split.test) {
    auto [value, seconds] = time_section([&] { return model->predict(rec.arch); });
    queries.add(seconds);
    pred.push_back(value);
    truth.push_back(rec.accuracy);
  }
  out.warnings = model->warnings();
  try {
    MetricReport r = score_predictions(pred, truth);
    r.fit_time_s = fit_seconds;
    r.query_time_s = queries.mean();
    out.report = r;
  } catch (const UndefinedCorrelationError& e) {
    out.skip_reason = std::string("undefined correlation: ") + e.what();
  }
  return out;
}

TrialOutcome run_trial(const TrialSpec& spec) { return run_trial(spec, emprox_factory(spec.predictor)); }

const char* metric_name(Metric m) {
  switch (m) {
    case Metric::Mae: return "MAE";
    case Metric::Rmse: return "RMSE";
    case Metric::Pearson: return "Pearson";
    case Metric::Spearman: return "Spearman";
    case Metric::Kendall: return "Kendall";
    case Metric::FitTime: return "FitTime";
    case Metric::QueryTime: return "QueryTime";
  }
  return "?";
}

double metric_value(const MetricReport& r, Metric m) {
  switch (m) {
    case Metric::Mae: return r.mae;
    case Metric::Rmse: return r.rmse;
    case Metric::Pearson: return r.pearson;
    case Metric::Spearman: return r.spearman;
    case Metric::Kendall: return r.kendall;
    case Metric::FitTime: return r.fit_time_s;
    case Metric::QueryTime: return r.query_time_s;
  }
  return 0.0;
}

bool is_time_metric(Metric m) { return m == Metric::FitTime || m == Metric::QueryTime; }

namespace {

double& metric_ref(MetricReport& r, Metric m) {
  switch (m) {
    case Metric::Mae: return r.mae;
    case Metric::Rmse: return r.rmse;
    case Metric::Pearson: return r.pearson;
    case Metric::Spearman: return r.spearman;
    case Metric::Kendall: return r.kendall;
    case Metric::FitTime: return r.fit_time_s;
    case Metric::QueryTime: break;
  }
  return r.query_time_s;
}

}  // namespace

void aggregate(EvalReport& report) {
  report.n_trials = report.trials.size();
  report.skipped = 0;
  std::vector<const MetricReport*> ok;
  for (const auto& t : report.trials) {
    if (t.report) {
      ok.push_back(&*t.report);
    } else {
      ++report.skipped;
    }
  }
  if (ok.empty()) throw InputError("all " + std::to_string(report.n_trials) + " trials were skipped");
  report.mean = {};
  report.stddev = {};
  const double n = static_cast<double>(ok.size());
  for (Metric m : kAllMetrics) {
    double sum = 0.0;
    for (const auto* r : ok) sum += metric_value(*r, m);
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto* r : ok) ss += (metric_value(*r, m) - mean) * (metric_value(*r, m) - mean);
    metric_ref(report.mean, m) = mean;
    metric_ref(report.stddev, m) = ok.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  report.single_trial_std = ok.size() == 1;
}

EvalReport run_experiment(const TrialSpec& spec_template, std::size_t n_trials, std::uint64_t base_seed,
                          std::size_t jobs, const SurrogateFactory& factory) {
  if (n_trials < 1) throw InputError("n_trials must be at least 1");
  EvalReport report;
  report.k = spec_template.predictor.k;
  report.d = spec_template.predictor.model.hidden_dim;
  report.base_seed = base_seed;
  report.label = "EmProx(k=" + std::to_string(report.k) + ",d=" + std::to_string(report.d) + ")";
  report.trials.resize(n_trials);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n_trials; i = next++) {
      try {
        TrialSpec spec = spec_template;
        spec.seed = base_seed + i;
        report.trials[i] = run_trial(spec, factory);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n_trials));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  aggregate(report);
  return report;
}

EvalReport run_experiment(const TrialSpec& spec_template, std::size_t n_trials, std::uint64_t base_seed,
                          std::size_t jobs) {
  return run_experiment(spec_template, n_trials, base_seed, jobs, emprox_factory(spec_template.predictor));
}

std::vector<GridCell> grid_search(std::span<const std::size_t> ks, std::span<const std::size_t> ds,
                                  const TrialSpec& spec_template, std::size_t n_trials,
                                  std::uint64_t base_seed, std::size_t jobs) {
  if (ks.empty() || ds.empty()) throw InputError("grid search needs at least one k and one d");
  std::vector<GridCell> cells;
  for (std::size_t k : ks) {
    for (std::size_t d : ds) {
      GridCell cell{k, d, std::nullopt, {}};
      try {
        TrialSpec spec = spec_template;
        spec.predictor.k = k;
        spec.predictor.model.hidden_dim = d;
        cell.report = run_experiment(spec, n_trials, base_seed, jobs);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::string report_to_json(std::span<const EvalReport> reports) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(eval_json(r));
  return j.dump(1) + "\n";
}

std::string grid_to_json(std::span<const GridCell> cells) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json jc = {{"k", c.k}, {"d", c.d}};
    if (c.report) {
      jc["report"] = eval_json(*c.report);
    } else {
      jc["error"] = c.error;
    }
    j.push_back(std::move(jc));
  }
  return j.dump(1) + "\n";
}

std::string report_to_csv(std::span<const EvalReport> reports) {
  std::string out = "method" + csv_header() + "\n";
  for (const auto& r : reports) out += "\"" + r.label + "\"" + csv_cells(r) + "\n";
  return out;
}

std::string grid_to_csv(std::span<const GridCell> cells) {
  std::string out = "k,d" + csv_header() + ",error\n";
  for (const auto& c : cells) {
    out += std::to_string(c.k) + "," + std::to_string(c.d);
    if (c.report) {
      out += csv_cells(*c.report) + ",";
    } else {
      for (std::size_t i = 0; i < std::size(kAllMetrics); ++i) out += ",";
      std::string err = c.error;
      for (char& ch : err) {
        if (ch == ',' || ch == '\n') ch = ' ';
      }
      out += "," + err;
    }
    out += "\n";
  }
  return out;
}

std::string format_table(std::span<const EvalReport> reports) {
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-22s", "method");
  out += buf;
  for (Metric m : kAllMetrics) {
    std::snprintf(buf, sizeof(buf), " %19s", metric_name(m));
    out += buf;
  }
  out += "\n";
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-22s", r.label.c_str());
    out += buf;
    for (Metric m : kAllMetrics) {
      std::snprintf(buf, sizeof(buf), " %9.4f +- %6.4f", metric_value(r.mean, m), metric_value(r.stddev, m));
      out += buf;
    }
    out += "\n";
    if (r.skipped > 0) {
      std::snprintf(buf, sizeof(buf), "  (%zu of %zu trials skipped)\n", r.skipped, r.n_trials);
      out += buf;
    }
    if (r.single_trial_std) out += "  (single trial: std reported as 0)\n";
  }
  return out;
}

}  // namespace emprox
