#pragma once

// Recurrent sequence autoencoder with attention.
//
// Encoder: single-layer LSTM over the token embeddings; the embedding is the
// mean of the per-step hidden states.
// Decoder: single-layer LSTM initialised from the unit-normalised embedding,
// teacher-forced on the target shifted by one. At each step the decoder state
// attends (scaled dot product) over the encoder states; [state; context] is
// projected through tanh and then to vocabulary logits.
//
// All parameters live in one flat buffer so the optimizer and the finite
// difference check can treat them uniformly.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "emprox/archspace.hpp"

namespace emprox {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

bool all_finite(std::span<const double> values) noexcept;

struct ModelConfig {
  std::size_t vocab_size = 8;
  std::size_t hidden_dim = 32;
  std::size_t num_layers = 1;
  bool teacher_forcing = true;
  int epochs = 200;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ParamBlock {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  std::size_t offset;
  std::size_t size() const noexcept { return rows * cols; }
};

// Named tensors in buffer order. Depends only on (vocab_size, hidden_dim).
std::vector<ParamBlock> parameter_layout(std::size_t vocab_size, std::size_t hidden_dim);

class EncoderDecoder {
 public:
  // All parameters zero.
  explicit EncoderDecoder(const ModelConfig& cfg);

  // Parameters uniform in [-init_scale, init_scale], drawn from cfg.seed.
  static EncoderDecoder initialized(const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  std::size_t hidden_dim() const noexcept { return cfg_.hidden_dim; }
  std::size_t vocab_size() const noexcept { return cfg_.vocab_size; }
  const std::vector<ParamBlock>& layout() const noexcept { return layout_; }
  const ParamBlock& block(const std::string& name) const;

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  // JSON checkpoint carrying the config and every tensor with its shape.
  void save(const std::filesystem::path& path) const;
  static EncoderDecoder load(const std::filesystem::path& path);
  std::string to_json_string() const;
  static EncoderDecoder from_json_string(const std::string& text);

 private:
  ModelConfig cfg_;
  std::vector<ParamBlock> layout_;
  std::vector<double> params_;
};

struct Embedding {
  std::vector<double> vector;
  bool normalized = false;
};

// Throws DegenerateEmbeddingError when the norm is below 1e-12.
Embedding normalize(const Embedding& e);

struct EncoderOutput {
  Embedding embedding;  // raw mean of hidden states
  Matrix states;        // steps x hidden_dim
};

// Throws InputError for tokens outside the vocabulary.
EncoderOutput encode(const EncoderDecoder& model, const TokenSequence& seq);

struct DecoderOutput {
  Matrix logits;     // (target length - 1) x vocab_size
  Matrix attention;  // (target length - 1) x encoder steps
};

// Teacher-forced decode. Throws ConfigError when the embedding or encoder
// state width does not match the model.
DecoderOutput decode(const EncoderDecoder& model, const Embedding& e, const Matrix& encoder_states,
                     const TokenSequence& target);

// Mean over rows of -log softmax(logits row)[target token after SOS].
double nll_loss(const Matrix& logits, const TokenSequence& target);

// Greedy argmax decode of `length` tokens after SOS, feeding back predictions.
std::vector<TokenId> greedy_decode(const EncoderDecoder& model, const Embedding& e,
                                   const Matrix& encoder_states, TokenId sos, std::size_t length);

// Full-batch mean loss and its gradient with respect to every parameter.
// All sequences must have the same length.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};
LossGradient loss_and_gradient(const EncoderDecoder& model, std::span<const TokenSequence> corpus);
double corpus_loss(const EncoderDecoder& model, std::span<const TokenSequence> corpus);

struct TrainResult {
  EncoderDecoder model;
  std::vector<double> losses;  // mean loss per epoch, before that epoch's update
};

// Adam on the full batch for cfg.epochs epochs. Throws TrainingDivergenceError.
TrainResult train_autoencoder(std::span<const TokenSequence> corpus, const ModelConfig& cfg);

// Max over parameters of |analytic - numeric| / max(1, |analytic| + |numeric|),
// numeric gradients by central differences with the given step.
double grad_check(const EncoderDecoder& model, const TokenSequence& seq, double step);

// Fraction of teacher-forced argmax predictions that hit the true token,
// counted over operation positions only (SOS/EOS/PAD targets are skipped).
double reconstruction_accuracy(const EncoderDecoder& model, std::span<const TokenSequence> corpus,
                               const OperationVocabulary& vocab);

}  // namespace emprox
