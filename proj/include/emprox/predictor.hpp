#pragma once

// Accuracy estimation by inverse-distance-weighted k nearest neighbours in the
// learned (unit-norm) embedding space.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emprox/archspace.hpp"
#include "emprox/benchdata.hpp"
#include "emprox/seqmodel.hpp"

namespace emprox {

struct KnownPoint {
  Embedding embedding;  // normalized
  double accuracy = 0.0;
  std::string arch;
};

struct PredictorConfig {
  std::size_t k = 10;
  ModelConfig model;
  double zero_distance_epsilon = 1e-9;

  void validate() const;
};

// ConfigError on dimension mismatch.
double euclidean_distance(const Embedding& u, const Embedding& v);

// Selects the min(k, |known|) nearest points (ties by list order). If any
// selected point is closer than eps, returns the mean accuracy of those exact
// matches; otherwise the 1/distance weighted mean of the selected accuracies.
// NotFittedError for an empty known set.
double knn_estimate(const Embedding& query, std::span<const KnownPoint> known, std::size_t k,
                    double eps);

struct QueryResult {
  double accuracy = 0.0;
  double seconds = 0.0;
  std::optional<std::string> warning;
};

class Predictor {
 public:
  // Trains the autoencoder on the training architectures, then stores their
  // normalized embeddings with the known accuracies.
  static Predictor fit(std::span<const BenchmarkRecord> train, const PredictorConfig& cfg,
                       const OperationVocabulary& vocab = OperationVocabulary::nb201());

  // A zero-norm query embedding falls back to the mean of all known accuracies
  // and sets `warning`.
  QueryResult query(const Architecture& arch) const;
  double predict(const Architecture& arch) const { return query(arch).accuracy; }

  // Normalized embedding; DegenerateEmbeddingError for a zero-norm encoding.
  Embedding embed(const Architecture& arch) const;

  const std::vector<KnownPoint>& known() const noexcept { return known_; }
  const EncoderDecoder& model() const noexcept { return model_; }
  const PredictorConfig& config() const noexcept { return cfg_; }
  const OperationVocabulary& vocabulary() const noexcept { return vocab_; }
  std::size_t effective_k() const noexcept { return std::min(cfg_.k, known_.size()); }
  // Wall-clock training time of this process; not written by save().
  double fit_seconds() const noexcept { return fit_seconds_; }
  std::size_t corpus_size() const noexcept { return known_.size(); }
  const std::vector<double>& loss_curve() const noexcept { return losses_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  void save(const std::filesystem::path& path) const;
  static Predictor load(const std::filesystem::path& path);

 private:
  Predictor(EncoderDecoder model, PredictorConfig cfg, OperationVocabulary vocab)
      : model_(std::move(model)), cfg_(std::move(cfg)), vocab_(std::move(vocab)) {}

  EncoderDecoder model_;
  PredictorConfig cfg_;
  OperationVocabulary vocab_;
  std::vector<KnownPoint> known_;
  std::vector<double> losses_;
  std::vector<std::string> warnings_;
  double fit_seconds_ = 0.0;
};

struct EmbeddingRow {
  std::string arch;
  double accuracy = 0.0;
  std::vector<double> coords;
};

// Known points first (fit order), then `extra`.
std::vector<EmbeddingRow> dump_embeddings(const Predictor& p, std::span<const BenchmarkRecord> extra);

// Header `arch,accuracy,e0,...,e{d-1}`; values with 17 significant digits.
std::string embeddings_to_csv(std::span<const EmbeddingRow> rows);
std::vector<EmbeddingRow> parse_embeddings_csv(const std::string& text);

}  // namespace emprox
