#include <gtest/gtest.h>

#include <map>

#include "emprox/benchdata.hpp"
#include "emprox/errors.hpp"
#include "emprox/harness.hpp"
#include "json.hpp"

using namespace emprox;

namespace {

const BenchmarkTable& bench() {
  static const BenchmarkTable t = [] {
    SyntheticSpec s;
    s.n = 500;
    s.noise_sd = 2.0;
    s.seed = 12;
    return generate_synthetic(OperationVocabulary::nb201(), s);
  }();
  return t;
}

class Replay final : public Surrogate {
 public:
  double predict(const Architecture& a) const override {
    for (const auto& r : bench().records) {
      if (r.arch == a) return r.accuracy;
    }
    throw InputError("unknown architecture");
  }
};

class Constant final : public Surrogate {
 public:
  double predict(const Architecture&) const override { return 50.0; }
};

SurrogateFactory replay_factory() {
  return [](std::span<const BenchmarkRecord>, std::uint64_t) { return std::make_unique<Replay>(); };
}

TrialSpec quick_spec() {
  TrialSpec spec;
  spec.benchmark = &bench();
  spec.n_train = 40;
  spec.n_test = 30;
  spec.predictor.k = 5;
  spec.predictor.model.hidden_dim = 8;
  spec.predictor.model.epochs = 25;
  return spec;
}

void expect_same_except_time(const MetricReport& a, const MetricReport& b) {
  for (Metric m : kAllMetrics) {
    if (!is_time_metric(m)) {
      EXPECT_EQ(metric_value(a, m), metric_value(b, m)) << metric_name(m);
    }
  }
}

}  // namespace

TEST(Trial, GroundTruthReplayIsPerfect) {
  const auto out = run_trial(quick_spec(), replay_factory());
  ASSERT_TRUE(out.report);
  EXPECT_EQ(out.report->mae, 0.0);
  EXPECT_EQ(out.report->rmse, 0.0);
  EXPECT_NEAR(out.report->pearson, 1.0, 1e-12);
  EXPECT_NEAR(out.report->spearman, 1.0, 1e-12);
  EXPECT_NEAR(out.report->kendall, 1.0, 1e-12);
}

TEST(Trial, ConstantPredictorIsSkipped) {
  const auto out = run_trial(quick_spec(), [](auto, auto) { return std::make_unique<Constant>(); });
  EXPECT_TRUE(out.skipped());
  EXPECT_NE(out.skip_reason.find("undefined correlation"), std::string::npos);
}

TEST(Trial, SameSpecSameMetrics) {
  const auto a = run_trial(quick_spec());
  const auto b = run_trial(quick_spec());
  ASSERT_TRUE(a.report && b.report);
  expect_same_except_time(*a.report, *b.report);
  EXPECT_GT(a.report->fit_time_s, 0.0);
  EXPECT_GT(a.report->query_time_s, 0.0);
}

TEST(Aggregate, MeanAndSampleStdByHand) {
  EvalReport r;
  for (double v : {1.0, 2.0, 6.0}) {
    TrialOutcome t;
    MetricReport m;
    m.mae = v;
    m.spearman = v / 10;
    t.report = m;
    r.trials.push_back(t);
  }
  r.trials.push_back(TrialOutcome{});
  aggregate(r);
  EXPECT_EQ(r.n_trials, 4u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_NEAR(r.mean.mae, 3.0, 1e-15);
  EXPECT_NEAR(r.stddev.mae, std::sqrt((4.0 + 1.0 + 9.0) / 2.0), 1e-15);
  EXPECT_NEAR(r.mean.spearman, 0.3, 1e-15);
  EXPECT_FALSE(r.single_trial_std);
}

TEST(Aggregate, SingleTrialAndAllSkipped) {
  EvalReport r;
  TrialOutcome t;
  t.report = MetricReport{};
  t.report->mae = 4;
  r.trials = {t};
  aggregate(r);
  EXPECT_EQ(r.stddev.mae, 0.0);
  EXPECT_TRUE(r.single_trial_std);

  EvalReport none;
  none.trials.resize(3);
  EXPECT_THROW(aggregate(none), InputError);
}

TEST(Experiment, MatchesPerTrialRecomputation) {
  const auto r = run_experiment(quick_spec(), 3, 100, 1);
  ASSERT_EQ(r.trials.size(), 3u);
  double sum = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(r.trials[i].seed, 100 + i);
    TrialSpec spec = quick_spec();
    spec.seed = 100 + i;
    const auto single = run_trial(spec);
    expect_same_except_time(*single.report, *r.trials[i].report);
    sum += r.trials[i].report->spearman;
  }
  EXPECT_NEAR(r.mean.spearman, sum / 3, 1e-15);
  EXPECT_EQ(r.label, "EmProx(k=5,d=8)");
  EXPECT_THROW(run_experiment(quick_spec(), 0, 1, 1), InputError);
}

TEST(Experiment, ParallelMatchesSerial) {
  const auto serial = run_experiment(quick_spec(), 4, 7, 1);
  const auto parallel = run_experiment(quick_spec(), 4, 7, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(serial.trials[i].seed, parallel.trials[i].seed);
    expect_same_except_time(*serial.trials[i].report, *parallel.trials[i].report);
  }
  expect_same_except_time(serial.mean, parallel.mean);
  expect_same_except_time(serial.stddev, parallel.stddev);
}

TEST(Grid, ShapeAndDegenerateCell) {
  TrialSpec spec = quick_spec();
  spec.predictor.model.epochs = 3;
  const std::size_t ks[] = {3, 10, 60};
  const std::size_t ds[] = {2, 3, 4, 5};
  const auto cells = grid_search(ks, ds, spec, 1, 5);
  ASSERT_EQ(cells.size(), 12u);
  EXPECT_EQ(cells[0].k, 3u);
  EXPECT_EQ(cells[0].d, 2u);
  EXPECT_EQ(cells[4].k, 10u);
  EXPECT_EQ(cells[11].d, 5u);

  const std::size_t k1[] = {5}, d1[] = {8};
  const auto one = grid_search(k1, d1, quick_spec(), 2, 9);
  ASSERT_EQ(one.size(), 1u);
  const auto direct = run_experiment(quick_spec(), 2, 9);
  expect_same_except_time(one[0].report->mean, direct.mean);
}

TEST(Output, JsonAndCsvAgree) {
  const auto r = run_experiment(quick_spec(), 2, 3, 1);
  const EvalReport reports[] = {r};
  const auto j = nlohmann::json::parse(report_to_json(reports));
  const std::string csv = report_to_csv(reports);
  const auto nl = csv.find('\n');
  EXPECT_EQ(csv.substr(0, nl), "method,MAE,RMSE,Pearson,Spearman,Kendall,FitTime,QueryTime");
  std::string row = csv.substr(nl + 1);
  row.pop_back();
  ASSERT_EQ(row.substr(0, r.label.size() + 3), "\"" + r.label + "\",");
  std::vector<std::string> cells{r.label};
  for (std::size_t pos = r.label.size() + 3;;) {
    const auto c = row.find(',', pos);
    cells.push_back(row.substr(pos, c - pos));
    if (c == std::string::npos) break;
    pos = c + 1;
  }
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cells[0], r.label);
  std::size_t i = 1;
  for (Metric m : kAllMetrics) {
    const auto sep = cells[i].find("\xC2\xB1");
    const double mean = std::stod(cells[i].substr(0, sep));
    const double sd = std::stod(cells[i].substr(sep + 2));
    EXPECT_EQ(mean, j[0]["aggregate"][metric_name(m)]["mean"].get<double>());
    EXPECT_EQ(sd, j[0]["aggregate"][metric_name(m)]["std"].get<double>());
    ++i;
  }
  EXPECT_NE(format_table(reports).find("EmProx(k=5,d=8)"), std::string::npos);
}
