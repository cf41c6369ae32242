#include "emprox/benchdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "emprox/errors.hpp"
#include "emprox/rng.hpp"
#include "json.hpp"

namespace emprox {

namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(const std::string& text) {
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (!rest.empty()) {
    const std::size_t nl = rest.find('\n');
    std::string_view line = rest.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  return lines;
}

double parse_accuracy(std::string_view field, std::size_t line) {
  double value = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw RowError("accuracy '" + std::string(field) + "' is not a number", line);
  }
  if (!std::isfinite(value) || value < 0.0 || value > 100.0) {
    throw RowError("accuracy " + std::string(field) + " outside [0, 100]", line);
  }
  return value;
}

std::string format_shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

class TableBuilder {
 public:
  explicit TableBuilder(const OperationVocabulary& vocab) : vocab_(vocab) {}

  void add(std::string_view arch_text, double accuracy, std::string dataset, std::size_t line) {
    Architecture arch;
    try {
      arch = parse_arch_string(arch_text, vocab_);
    } catch (const Error& e) {
      throw RowError(e.what(), line);
    }
    if (!std::isfinite(accuracy) || accuracy < 0.0 || accuracy > 100.0) {
      throw RowError("accuracy outside [0, 100]", line);
    }
    if (!table_.records.empty() && arch.num_nodes != table_.records.front().arch.num_nodes) {
      throw RowError("cell has " + std::to_string(arch.num_nodes) + " nodes but earlier rows have " +
                         std::to_string(table_.records.front().arch.num_nodes),
                     line);
    }
    const std::string canonical = to_arch_string(arch, vocab_);
    if (!seen_.insert(canonical).second) throw DuplicateError(canonical);
    table_.records.push_back({std::move(arch), accuracy, std::move(dataset)});
  }

  BenchmarkTable finish(std::string provenance) {
    if (table_.records.empty()) throw InputError("benchmark table is empty");
    table_.provenance = std::move(provenance);
    return std::move(table_);
  }

 private:
  const OperationVocabulary& vocab_;
  std::unordered_set<std::string> seen_;
  BenchmarkTable table_;
};

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << contents;
  if (!out) throw InputError("failed writing " + path.string());
}

BenchFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".json" ? BenchFormat::Json : BenchFormat::Csv;
}

BenchmarkTable parse_benchmark_csv(const std::string& text, const std::string& provenance,
                                   const OperationVocabulary& vocab) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw InputError("benchmark CSV is empty");
  const auto header = split_fields(lines[0]);
  const bool has_dataset = header.size() == 3 && header[2] == "dataset";
  if (header.size() < 2 || header[0] != "arch" || header[1] != "accuracy" ||
      (header.size() == 3 && !has_dataset) || header.size() > 3) {
    throw RowError("expected header 'arch,accuracy[,dataset]'", 1);
  }
  TableBuilder builder(vocab);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    if (lines[i].empty()) {
      if (i + 1 == lines.size()) break;
      throw RowError("empty row", line);
    }
    const auto fields = split_fields(lines[i]);
    if (fields.size() != header.size()) {
      throw RowError("expected " + std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size()),
                     line);
    }
    const double acc = parse_accuracy(fields[1], line);
    builder.add(fields[0], acc, has_dataset ? fields[2] : std::string(), line);
  }
  return builder.finish(provenance);
}

BenchmarkTable parse_benchmark_json(const std::string& text, const std::string& provenance,
                                    const OperationVocabulary& vocab) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("benchmark JSON does not parse: ") + e.what());
  }
  if (!j.is_array()) throw InputError("benchmark JSON must be an array of records");
  TableBuilder builder(vocab);
  // JSON rows are reported by 1-based record index.
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& rec = j[i];
    if (!rec.is_object() || !rec.contains("arch") || !rec.contains("accuracy") ||
        !rec["arch"].is_string() || !rec["accuracy"].is_number()) {
      throw RowError("record needs string 'arch' and numeric 'accuracy'", i + 1);
    }
    std::string dataset;
    if (rec.contains("dataset")) dataset = rec["dataset"].get<std::string>();
    builder.add(rec["arch"].get<std::string>(), rec["accuracy"].get<double>(), std::move(dataset), i + 1);
  }
  return builder.finish(provenance);
}

BenchmarkTable load_benchmark(const std::filesystem::path& path, BenchFormat format,
                              const OperationVocabulary& vocab) {
  const std::string text = read_file(path);
  return format == BenchFormat::Json ? parse_benchmark_json(text, path.string(), vocab)
                                     : parse_benchmark_csv(text, path.string(), vocab);
}

std::string benchmark_to_csv(const BenchmarkTable& table, const OperationVocabulary& vocab) {
  std::string out = "arch,accuracy,dataset\n";
  for (const auto& r : table.records) {
    out += to_arch_string(r.arch, vocab);
    out += ',';
    out += format_shortest(r.accuracy);
    out += ',';
    out += r.dataset;
    out += '\n';
  }
  return out;
}

std::string benchmark_to_json(const BenchmarkTable& table, const OperationVocabulary& vocab) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : table.records) {
    j.push_back({{"arch", to_arch_string(r.arch, vocab)}, {"accuracy", r.accuracy}, {"dataset", r.dataset}});
  }
  return j.dump(1) + "\n";
}

void save_benchmark(const BenchmarkTable& table, const std::filesystem::path& path, BenchFormat format,
                    const OperationVocabulary& vocab) {
  write_file(path, format == BenchFormat::Json ? benchmark_to_json(table, vocab)
                                               : benchmark_to_csv(table, vocab));
}

std::vector<std::vector<double>> synthetic_score_table(const OperationVocabulary& vocab,
                                                       const SyntheticSpec& spec) {
  Rng rng(derive_seed(spec.seed, 1));
  std::vector<double> op_effect(vocab.num_ops());
  for (double& s : op_effect) s = rng.uniform(-spec.op_effect_half_range, spec.op_effect_half_range);
  std::vector<std::vector<double>> scores(edge_count(spec.num_nodes), std::vector<double>(vocab.num_ops()));
  for (auto& edge : scores) {
    for (std::size_t op = 0; op < edge.size(); ++op) {
      edge[op] = op_effect[op] + rng.uniform(-spec.edge_half_range, spec.edge_half_range);
    }
  }
  return scores;
}

BenchmarkTable generate_synthetic(const OperationVocabulary& vocab, const SyntheticSpec& spec) {
  if (spec.num_nodes < 2) throw InputError("synthetic space needs at least 2 nodes");
  if (!(spec.noise_sd >= 0.0)) throw InputError("noise_sd must be non-negative");
  const std::uint64_t space = space_size(vocab.num_ops(), spec.num_nodes);
  if (spec.n == 0) throw InputError("synthetic table needs n >= 1");
  if (spec.n > space) {
    throw InputError("requested " + std::to_string(spec.n) + " architectures but the space has only " +
                     std::to_string(space));
  }
  if (space > 50'000'000) throw InputError("search space too large to sample exhaustively");

  const auto scores = synthetic_score_table(vocab, spec);
  Rng pick(derive_seed(spec.seed, 2));
  Rng noise(derive_seed(spec.seed, 3));
  const auto indices = sample_indices(static_cast<std::size_t>(space), spec.n, pick);

  BenchmarkTable table;
  table.records.reserve(spec.n);
  for (std::size_t idx : indices) {
    Architecture arch = architecture_at(idx, vocab.num_ops(), spec.num_nodes);
    double acc = spec.base;
    for (std::size_t e = 0; e < arch.edge_ops.size(); ++e) acc += scores[e][static_cast<std::size_t>(arch.edge_ops[e])];
    if (spec.noise_sd > 0.0) acc += noise.normal(0.0, spec.noise_sd);
    table.records.push_back({std::move(arch), std::clamp(acc, 0.0, 100.0), "synthetic"});
  }
  std::ostringstream prov;
  prov << "synthetic(n=" << spec.n << ",noise_sd=" << spec.noise_sd << ",seed=" << spec.seed << ")";
  table.provenance = prov.str();
  return table;
}

Split sample_split(const BenchmarkTable& table, std::size_t n_train, std::size_t n_test,
                   std::uint64_t seed) {
  if (n_train + n_test > table.size()) {
    throw InputError("split needs " + std::to_string(n_train + n_test) + " records, table has " +
                     std::to_string(table.size()));
  }
  Rng rng(seed);
  const auto idx = sample_indices(table.size(), n_train + n_test, rng);
  Split split;
  split.train.reserve(n_train);
  split.test.reserve(n_test);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_train ? split.train : split.test).push_back(table.records[idx[i]]);
  }
  return split;
}

BenchmarkTable convert_nb201_export(const std::string& text, const std::string& accuracy_column,
                                    const std::string& dataset, const OperationVocabulary& vocab) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw InputError("export is empty");
  const auto header = split_fields(lines[0]);
  const auto arch_it = std::find(header.begin(), header.end(), "arch");
  const auto acc_it = std::find(header.begin(), header.end(), accuracy_column);
  if (arch_it == header.end() || acc_it == header.end()) {
    throw RowError("export header needs columns 'arch' and '" + accuracy_column + "'", 1);
  }
  const auto arch_col = static_cast<std::size_t>(arch_it - header.begin());
  const auto acc_col = static_cast<std::size_t>(acc_it - header.begin());
  TableBuilder builder(vocab);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_fields(lines[i]);
    if (fields.size() != header.size()) throw RowError("wrong field count", i + 1);
    builder.add(fields[arch_col], parse_accuracy(fields[acc_col], i + 1), dataset, i + 1);
  }
  return builder.finish("nb201-export:" + accuracy_column);
}

}  // namespace emprox
