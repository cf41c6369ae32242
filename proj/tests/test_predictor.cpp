#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "emprox/benchdata.hpp"
#include "emprox/errors.hpp"
#include "emprox/predictor.hpp"
#include "oracles.hpp"

using namespace emprox;

namespace {

KnownPoint point(std::vector<double> e, double acc) { return {Embedding{std::move(e), true}, acc, ""}; }

PredictorConfig quick_config(std::size_t k = 5, std::size_t d = 8) {
  PredictorConfig cfg;
  cfg.k = k;
  cfg.model.hidden_dim = d;
  cfg.model.epochs = 40;
  cfg.model.seed = 17;
  return cfg;
}

const BenchmarkTable& bench() {
  static const BenchmarkTable t = [] {
    SyntheticSpec s;
    s.n = 400;
    s.noise_sd = 1.0;
    s.seed = 8;
    return generate_synthetic(OperationVocabulary::nb201(), s);
  }();
  return t;
}

}  // namespace

TEST(Distance, Examples) {
  const Embedding u{{0.6, 0.8}, true};
  EXPECT_EQ(euclidean_distance(u, u), 0.0);
  EXPECT_NEAR(euclidean_distance(Embedding{{1, 0}, true}, Embedding{{0, 1}, true}), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(euclidean_distance(u, Embedding{{-0.6, -0.8}, true}), 2.0, 1e-15);
  EXPECT_THROW(euclidean_distance(u, Embedding{{1, 0, 0}, true}), ConfigError);
}

TEST(Knn, Examples) {
  const Embedding q{{0, 0}, false};
  const std::vector<KnownPoint> three{point({1, 0}, 90), point({0, 2}, 80), point({4, 0}, 70)};
  EXPECT_EQ(knn_estimate(q, three, 1, 1e-9), 90);
  EXPECT_NEAR(knn_estimate(q, three, 3, 1e-9), 147.5 / 1.75, 1e-12);
  EXPECT_NEAR(knn_estimate(q, three, 3, 1e-9), 84.28571428571429, 1e-12);

  const std::vector<KnownPoint> pair{point({1, 0}, 80), point({-1, 0}, 90)};
  EXPECT_NEAR(knn_estimate(q, pair, 2, 1e-9), 85, 1e-12);

  const std::vector<KnownPoint> exact{point({1, 0}, 50), point({0, 0}, 73.1)};
  EXPECT_EQ(knn_estimate(q, exact, 2, 1e-9), 73.1);
  EXPECT_THROW(knn_estimate(q, {}, 2, 1e-9), NotFittedError);
}

TEST(Knn, ResultIsWithinSelectedRangeAndMatchesOracle) {
  std::mt19937_64 g(3);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> acc(0, 100);
  for (int i = 0; i < 300; ++i) {
    std::vector<KnownPoint> known;
    for (int j = 0; j < 20; ++j) known.push_back(point({n(g), n(g), n(g)}, acc(g)));
    const Embedding q{{n(g), n(g), n(g)}, false};
    const std::size_t k = 1 + i % 25;
    const double got = knn_estimate(q, known, k, 1e-9);
    EXPECT_EQ(got, oracle::knn(q, known, k, 1e-9));
    double lo = 100, hi = 0;
    for (const auto& p : known) {
      lo = std::min(lo, p.accuracy);
      hi = std::max(hi, p.accuracy);
    }
    EXPECT_GE(got, lo - 1e-12);
    EXPECT_LE(got, hi + 1e-12);
  }
}

TEST(Predictor, FitStoresOnePointPerTrainingArch) {
  const Split s = sample_split(bench(), 121, 100, 1);
  const auto p = Predictor::fit(s.train, quick_config());
  EXPECT_EQ(p.known().size(), 121u);
  EXPECT_EQ(p.effective_k(), 5u);
  EXPECT_EQ(p.loss_curve().size(), 40u);
  EXPECT_GT(p.fit_seconds(), 0.0);
  for (const auto& kp : p.known()) {
    double norm = 0;
    for (double x : kp.embedding.vector) norm += x * x;
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-12);
  }
}

TEST(Predictor, FitIsDeterministic) {
  const Split s = sample_split(bench(), 60, 10, 2);
  const auto a = Predictor::fit(s.train, quick_config());
  const auto b = Predictor::fit(s.train, quick_config());
  for (std::size_t i = 0; i < a.known().size(); ++i) {
    EXPECT_EQ(a.known()[i].embedding.vector, b.known()[i].embedding.vector);
  }
}

TEST(Predictor, TrainingArchitectureReturnsItsOwnAccuracy) {
  const Split s = sample_split(bench(), 50, 10, 3);
  const auto p = Predictor::fit(s.train, quick_config());
  for (const auto& r : s.train) EXPECT_EQ(p.predict(r.arch), r.accuracy);
}

TEST(Predictor, ConstantFieldGivesConstantPredictions) {
  Split s = sample_split(bench(), 40, 20, 4);
  for (auto& r : s.train) r.accuracy = 66.25;
  const auto p = Predictor::fit(s.train, quick_config());
  for (const auto& r : s.test) EXPECT_NEAR(p.predict(r.arch), 66.25, 1e-12);
}

TEST(Predictor, LargeKWarnsAndUsesEveryPoint) {
  const Split s = sample_split(bench(), 12, 5, 5);
  const auto p = Predictor::fit(s.train, quick_config(60));
  EXPECT_EQ(p.effective_k(), 12u);
  ASSERT_EQ(p.warnings().size(), 1u);
}

TEST(Predictor, RejectsBadInput) {
  EXPECT_THROW(Predictor::fit({}, quick_config()), InputError);
  const Split s = sample_split(bench(), 10, 5, 6);
  EXPECT_THROW(Predictor::fit(s.train, quick_config(0)), ConfigError);
}

TEST(Predictor, SaveLoadPreservesQueries) {
  const Split s = sample_split(bench(), 40, 30, 7);
  const auto p = Predictor::fit(s.train, quick_config());
  const auto path = std::filesystem::temp_directory_path() / "emprox_predictor_test.json";
  p.save(path);
  const auto back = Predictor::load(path);
  for (const auto& r : s.test) EXPECT_EQ(back.predict(r.arch), p.predict(r.arch));
  std::filesystem::remove(path);
}

TEST(Embeddings, DumpReproducesQueries) {
  const Split s = sample_split(bench(), 60, 40, 8);
  const auto p = Predictor::fit(s.train, quick_config());
  const auto rows = parse_embeddings_csv(embeddings_to_csv(dump_embeddings(p, s.test)));
  ASSERT_EQ(rows.size(), 100u);

  std::vector<KnownPoint> known;
  for (std::size_t i = 0; i < 60; ++i) known.push_back({Embedding{rows[i].coords, true}, rows[i].accuracy, rows[i].arch});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double norm = 0;
    for (double x : rows[i].coords) norm += x * x;
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-9);
  }
  for (std::size_t i = 60; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].arch, to_arch_string(s.test[i - 60].arch));
    const double from_dump = knn_estimate(Embedding{rows[i].coords, true}, known, p.config().k, 1e-9);
    EXPECT_EQ(from_dump, p.predict(s.test[i - 60].arch));
  }
}
