#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emprox/archspace.hpp"

namespace emprox {

struct BenchmarkRecord {
  Architecture arch;
  double accuracy = 0.0;  // percent, [0, 100]
  std::string dataset;

  bool operator==(const BenchmarkRecord&) const = default;
};

struct BenchmarkTable {
  std::vector<BenchmarkRecord> records;
  std::string provenance;

  std::size_t size() const noexcept { return records.size(); }
};

enum class BenchFormat { Csv, Json };

// Picks the format from the extension (.json -> Json, anything else -> Csv).
BenchFormat format_for(const std::filesystem::path& path);

// Validates every row: cell grammar, accuracy range, unique arch strings.
// Throws RowError (with line number), DuplicateError or InputError.
BenchmarkTable load_benchmark(const std::filesystem::path& path, BenchFormat format,
                              const OperationVocabulary& vocab = OperationVocabulary::nb201());
BenchmarkTable parse_benchmark_csv(const std::string& text, const std::string& provenance,
                                   const OperationVocabulary& vocab = OperationVocabulary::nb201());
BenchmarkTable parse_benchmark_json(const std::string& text, const std::string& provenance,
                                    const OperationVocabulary& vocab = OperationVocabulary::nb201());

// Header `arch,accuracy,dataset`; accuracies with 17 significant digits.
std::string benchmark_to_csv(const BenchmarkTable& table,
                             const OperationVocabulary& vocab = OperationVocabulary::nb201());
std::string benchmark_to_json(const BenchmarkTable& table,
                              const OperationVocabulary& vocab = OperationVocabulary::nb201());
void save_benchmark(const BenchmarkTable& table, const std::filesystem::path& path, BenchFormat format,
                    const OperationVocabulary& vocab = OperationVocabulary::nb201());

struct SyntheticSpec {
  std::size_t num_nodes = 4;
  std::size_t n = 1000;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;
  double base = 60.0;
  // score[edge][op] = op_effect[op] + deviation[edge][op], both uniform in [-h, h]
  double op_effect_half_range = 6.0;
  double edge_half_range = 2.0;
};

// score[edge][op] table used by generate_synthetic for the given seed.
std::vector<std::vector<double>> synthetic_score_table(const OperationVocabulary& vocab,
                                                       const SyntheticSpec& spec);

// n distinct architectures, uniformly sampled; accuracy =
// clamp(base + sum_e score[e][op_e] + N(0, noise_sd), 0, 100).
BenchmarkTable generate_synthetic(const OperationVocabulary& vocab, const SyntheticSpec& spec);

struct Split {
  std::vector<BenchmarkRecord> train;
  std::vector<BenchmarkRecord> test;
};

// Disjoint uniform sample without replacement.
Split sample_split(const BenchmarkTable& table, std::size_t n_train, std::size_t n_test,
                   std::uint64_t seed);

// Convert an exported NAS-Bench-201 listing (CSV with at least the columns
// `arch` and the named accuracy column, e.g. `cifar10_valid`) into the
// benchmark CSV format, tagging rows with `dataset`.
BenchmarkTable convert_nb201_export(const std::string& text, const std::string& accuracy_column,
                                    const std::string& dataset,
                                    const OperationVocabulary& vocab = OperationVocabulary::nb201());

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace emprox
