#include "emprox/predictor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "emprox/errors.hpp"
#include "emprox/metrics.hpp"
#include "json.hpp"

namespace emprox {

namespace {

constexpr int kPredictorVersion = 1;
constexpr const char* kPredictorFormat = "emprox-predictor";

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(std::string_view field, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw RowError("'" + std::string(field) + "' is not a number", line);
  }
  return value;
}

}  // namespace

void PredictorConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (!(zero_distance_epsilon >= 0.0)) throw ConfigError("zero_distance_epsilon must be non-negative");
  model.validate();
}

double euclidean_distance(const Embedding& u, const Embedding& v) {
  if (u.vector.size() != v.vector.size()) {
    throw ConfigError("embedding dimensions differ: " + std::to_string(u.vector.size()) + " vs " +
                      std::to_string(v.vector.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.vector.size(); ++i) {
    const double diff = u.vector[i] - v.vector[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

double knn_estimate(const Embedding& query, std::span<const KnownPoint> known, std::size_t k,
                    double eps) {
  if (known.empty()) throw NotFittedError("no known points to estimate from");
  if (k == 0) throw ConfigError("k must be at least 1");
  const std::size_t take = std::min(k, known.size());

  std::vector<double> dist(known.size());
  for (std::size_t i = 0; i < known.size(); ++i) dist[i] = euclidean_distance(query, known[i].embedding);

  std::vector<std::size_t> order(known.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  order.resize(take);

  double exact_sum = 0.0;
  std::size_t exact_count = 0;
  for (std::size_t i : order) {
    if (dist[i] < eps) {
      exact_sum += known[i].accuracy;
      ++exact_count;
    }
  }
  if (exact_count > 0) return exact_sum / static_cast<double>(exact_count);

  double num = 0.0, den = 0.0;
  for (std::size_t i : order) {
    const double w = 1.0 / dist[i];
    num += w * known[i].accuracy;
    den += w;
  }
  return num / den;
}

Predictor Predictor::fit(std::span<const BenchmarkRecord> train, const PredictorConfig& cfg,
                         const OperationVocabulary& vocab) {
  if (train.empty()) throw InputError("training set is empty");
  PredictorConfig config = cfg;
  config.model.vocab_size = vocab.token_count();
  config.validate();
  for (const auto& r : train) {
    if (!(r.accuracy >= 0.0 && r.accuracy <= 100.0)) throw InputError("training accuracy outside [0, 100]");
  }

  std::vector<TokenSequence> corpus;
  corpus.reserve(train.size());
  for (const auto& r : train) corpus.push_back(to_sequence(r.arch, vocab));

  auto [trained, seconds] = time_section([&] {
    TrainResult result = train_autoencoder(corpus, config.model);
    Predictor p(std::move(result.model), config, vocab);
    p.losses_ = std::move(result.losses);
    p.known_.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      Embedding e = normalize(encode(p.model_, corpus[i]).embedding);
      p.known_.push_back({std::move(e), train[i].accuracy, to_arch_string(train[i].arch, vocab)});
    }
    return p;
  });
  trained.fit_seconds_ = seconds;
  if (config.k > trained.known_.size()) {
    trained.warnings_.push_back("k=" + std::to_string(config.k) + " exceeds the " +
                                std::to_string(trained.known_.size()) +
                                " known points; using all of them");
  }
  return std::move(trained);
}

Embedding Predictor::embed(const Architecture& arch) const {
  return normalize(encode(model_, to_sequence(arch, vocab_)).embedding);
}

QueryResult Predictor::query(const Architecture& arch) const {
  if (known_.empty()) throw NotFittedError("predictor has not been fitted");
  QueryResult out;
  out.seconds = time_section([&] {
    try {
      out.accuracy = knn_estimate(embed(arch), known_, cfg_.k, cfg_.zero_distance_epsilon);
    } catch (const DegenerateEmbeddingError&) {
      double s = 0.0;
      for (const auto& kp : known_) s += kp.accuracy;
      out.accuracy = s / static_cast<double>(known_.size());
      out.warning = "degenerate embedding for " + to_arch_string(arch, vocab_) +
                    "; returning the mean known accuracy";
    }
  });
  return out;
}

void Predictor::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format"] = kPredictorFormat;
  j["version"] = kPredictorVersion;
  j["k"] = cfg_.k;
  j["zero_distance_epsilon"] = cfg_.zero_distance_epsilon;
  j["operations"] = vocab_.ops();
  j["model"] = nlohmann::json::parse(model_.to_json_string());
  nlohmann::json known = nlohmann::json::array();
  for (const auto& kp : known_) {
    known.push_back({{"arch", kp.arch}, {"accuracy", kp.accuracy}, {"embedding", kp.embedding.vector}});
  }
  j["known"] = std::move(known);
  write_file(path, j.dump() + "\n");
}

Predictor Predictor::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("predictor file does not parse: " + std::string(e.what()));
  }
  try {
    if (j.value("format", "") != kPredictorFormat) throw InputError("not a predictor file");
    if (j.at("version").get<int>() != kPredictorVersion) throw InputError("unsupported predictor version");
    EncoderDecoder model = EncoderDecoder::from_json_string(j.at("model").dump());
    PredictorConfig cfg;
    cfg.k = j.at("k").get<std::size_t>();
    cfg.zero_distance_epsilon = j.at("zero_distance_epsilon").get<double>();
    cfg.model = model.config();
    cfg.validate();
    OperationVocabulary vocab(j.at("operations").get<std::vector<std::string>>());
    if (vocab.token_count() != model.vocab_size()) throw InputError("vocabulary does not match the model");
    Predictor p(std::move(model), cfg, std::move(vocab));
    for (const auto& kp : j.at("known")) {
      Embedding e{kp.at("embedding").get<std::vector<double>>(), true};
      if (e.vector.size() != p.model_.hidden_dim()) throw InputError("known embedding has wrong dimension");
      p.known_.push_back({std::move(e), kp.at("accuracy").get<double>(), kp.at("arch").get<std::string>()});
    }
    if (p.known_.empty()) throw InputError("predictor file has no known points");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed predictor file: " + std::string(e.what()));
  }
}

std::vector<EmbeddingRow> dump_embeddings(const Predictor& p, std::span<const BenchmarkRecord> extra) {
  std::vector<EmbeddingRow> rows;
  rows.reserve(p.known().size() + extra.size());
  for (const auto& kp : p.known()) rows.push_back({kp.arch, kp.accuracy, kp.embedding.vector});
  for (const auto& r : extra) {
    rows.push_back({to_arch_string(r.arch, p.vocabulary()), r.accuracy, p.embed(r.arch).vector});
  }
  return rows;
}

std::string embeddings_to_csv(std::span<const EmbeddingRow> rows) {
  const std::size_t d = rows.empty() ? 0 : rows.front().coords.size();
  std::string out = "arch,accuracy";
  for (std::size_t i = 0; i < d; ++i) out += ",e" + std::to_string(i);
  out += '\n';
  for (const auto& r : rows) {
    if (r.coords.size() != d) throw InputError("embedding rows have inconsistent dimensions");
    out += r.arch;
    out += ',';
    out += format17(r.accuracy);
    for (double c : r.coords) {
      out += ',';
      out += format17(c);
    }
    out += '\n';
  }
  return out;
}

std::vector<EmbeddingRow> parse_embeddings_csv(const std::string& text) {
  std::vector<EmbeddingRow> rows;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line(text.data() + start, nl - start);
    start = nl + 1;
    ++line_no;
    std::vector<std::string_view> fields;
    std::size_t f = 0;
    for (;;) {
      const std::size_t comma = line.find(',', f);
      fields.push_back(line.substr(f, comma == std::string_view::npos ? std::string_view::npos : comma - f));
      if (comma == std::string_view::npos) break;
      f = comma + 1;
    }
    if (line_no == 1) {
      if (fields.size() < 2 || fields[0] != "arch" || fields[1] != "accuracy") {
        throw RowError("expected header 'arch,accuracy,e0,...'", 1);
      }
      width = fields.size();
      continue;
    }
    if (fields.size() != width) throw RowError("wrong field count", line_no);
    EmbeddingRow row{std::string(fields[0]), parse_double(fields[1], line_no), {}};
    for (std::size_t i = 2; i < fields.size(); ++i) row.coords.push_back(parse_double(fields[i], line_no));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace emprox
