#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "emprox/benchdata.hpp"
#include "emprox/errors.hpp"

using namespace emprox;

namespace {

const std::string kA = "|nor_conv_3x3~0|+|skip_connect~0|nor_conv_1x1~1|+|none~0|avg_pool_3x3~1|nor_conv_3x3~2|";
const std::string kB = "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|";

const auto& vocab() { return OperationVocabulary::nb201(); }

SyntheticSpec spec(std::size_t n, double noise, std::uint64_t seed) {
  SyntheticSpec s;
  s.n = n;
  s.noise_sd = noise;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(Csv, TwoRows) {
  const auto t = parse_benchmark_csv("arch,accuracy,dataset\n" + kA + ",91.5,cifar10\n" + kB + ",10,cifar10\n", "mem");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.records[0].arch.edge_ops, (std::vector<int>{3, 1, 2, 0, 4, 3}));
  EXPECT_EQ(t.records[0].accuracy, 91.5);
  EXPECT_EQ(t.records[1].dataset, "cifar10");
}

TEST(Csv, AccuracyOutOfRangeNamesTheLine) {
  try {
    parse_benchmark_csv("arch,accuracy\n" + kB + ",50\n" + kA + ",101.0\n", "mem");
    FAIL();
  } catch (const RowError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Csv, DuplicateNamesTheArchitecture) {
  try {
    parse_benchmark_csv("arch,accuracy\n" + kA + ",50\n" + kA + ",60\n", "mem");
    FAIL();
  } catch (const DuplicateError& e) {
    EXPECT_EQ(e.arch(), kA);
  }
}

TEST(Csv, OtherErrors) {
  EXPECT_THROW(parse_benchmark_csv("", "mem"), InputError);
  EXPECT_THROW(parse_benchmark_csv("arch,accuracy\n", "mem"), InputError);
  EXPECT_THROW(parse_benchmark_csv("name,score\n" + kA + ",5\n", "mem"), RowError);
  EXPECT_THROW(parse_benchmark_csv("arch,accuracy\n" + kA + ",abc\n", "mem"), RowError);
  EXPECT_THROW(parse_benchmark_csv("arch,accuracy\n|none~0|+|none~0|none~1|\n", "mem"), RowError);
  EXPECT_THROW(parse_benchmark_csv("arch,accuracy\n" + kB + ",5\n|none~0|,5\n", "mem"), RowError);
}

TEST(RoundTrip, CsvAndJsonAreExact) {
  const auto t = generate_synthetic(vocab(), spec(300, 2.0, 5));
  const auto csv = parse_benchmark_csv(benchmark_to_csv(t), "mem");
  const auto json = parse_benchmark_json(benchmark_to_json(t), "mem");
  EXPECT_EQ(csv.records, t.records);
  EXPECT_EQ(json.records, t.records);
  EXPECT_EQ(benchmark_to_csv(csv), benchmark_to_csv(t));

  const auto dir = std::filesystem::temp_directory_path();
  save_benchmark(t, dir / "emprox_rt.json", BenchFormat::Json);
  save_benchmark(t, dir / "emprox_rt.csv", BenchFormat::Csv);
  EXPECT_EQ(load_benchmark(dir / "emprox_rt.json", format_for(dir / "emprox_rt.json")).records, t.records);
  EXPECT_EQ(load_benchmark(dir / "emprox_rt.csv", format_for(dir / "emprox_rt.csv")).records, t.records);
  std::filesystem::remove(dir / "emprox_rt.json");
  std::filesystem::remove(dir / "emprox_rt.csv");
}

TEST(Synthetic, DeterministicPerSeed) {
  EXPECT_EQ(generate_synthetic(vocab(), spec(200, 0, 9)).records, generate_synthetic(vocab(), spec(200, 0, 9)).records);
  EXPECT_EQ(generate_synthetic(vocab(), spec(200, 1.5, 9)).records,
            generate_synthetic(vocab(), spec(200, 1.5, 9)).records);
  EXPECT_NE(generate_synthetic(vocab(), spec(200, 0, 9)).records, generate_synthetic(vocab(), spec(200, 0, 10)).records);
}

TEST(Synthetic, SingleEdgeChangeMovesByTableDelta) {
  const auto s = spec(15625, 0, 4);
  const auto table = synthetic_score_table(vocab(), s);
  const auto full = generate_synthetic(vocab(), s);
  std::map<Architecture, double> acc;
  for (const auto& r : full.records) acc[r.arch] = r.accuracy;
  int checked = 0;
  for (const auto& [arch, a] : acc) {
    if (a <= 0 || a >= 100) continue;
    for (std::size_t e = 0; e < 6; ++e) {
      Architecture other = arch;
      other.edge_ops[e] = (arch.edge_ops[e] + 1) % 5;
      const double b = acc.at(other);
      if (b <= 0 || b >= 100) continue;
      const double delta = table[e][other.edge_ops[e]] - table[e][arch.edge_ops[e]];
      EXPECT_NEAR(b - a, delta, 1e-9);
      ++checked;
    }
    if (checked > 3000) break;
  }
  EXPECT_GT(checked, 1000);
}

TEST(Synthetic, FullSpaceIsUniqueAndExhaustive) {
  const auto full = generate_synthetic(vocab(), spec(15625, 0, 1));
  std::set<std::string> strings;
  for (const auto& r : full.records) strings.insert(to_arch_string(r.arch));
  EXPECT_EQ(strings.size(), 15625u);
  EXPECT_THROW(generate_synthetic(vocab(), spec(15626, 0, 1)), InputError);
}

TEST(Synthetic, AccuraciesStayInRangeWithLargeNoise) {
  const auto t = generate_synthetic(vocab(), spec(500, 80.0, 3));
  for (const auto& r : t.records) {
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 100.0);
  }
}

TEST(Split, DisjointAndDeterministic) {
  const auto t = generate_synthetic(vocab(), spec(400, 1, 2));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Split s = sample_split(t, 121, 100, seed);
    ASSERT_EQ(s.train.size(), 121u);
    ASSERT_EQ(s.test.size(), 100u);
    std::set<Architecture> train;
    for (const auto& r : s.train) train.insert(r.arch);
    EXPECT_EQ(train.size(), 121u);
    for (const auto& r : s.test) EXPECT_FALSE(train.count(r.arch));
  }
  EXPECT_EQ(sample_split(t, 121, 100, 7).train, sample_split(t, 121, 100, 7).train);
  EXPECT_EQ(sample_split(t, 121, 100, 7).test, sample_split(t, 121, 100, 7).test);
  EXPECT_THROW(sample_split(t, 300, 101, 1), InputError);
}

TEST(Nb201Export, PicksNamedColumn) {
  const std::string text = "index,arch,cifar10_valid,cifar100_valid\n0," + kA + ",88.5,61.0\n1," + kB + ",10.0,1.0\n";
  const auto t = convert_nb201_export(text, "cifar100_valid", "cifar100");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.records[0].accuracy, 61.0);
  EXPECT_EQ(t.records[1].dataset, "cifar100");
  EXPECT_THROW(convert_nb201_export(text, "imagenet_valid", "x"), RowError);
}
