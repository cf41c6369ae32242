#pragma once

// Slow, obviously-correct reference implementations used as test oracles.
// None of these share code with the library beyond its public data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "emprox/archspace.hpp"
#include "emprox/predictor.hpp"
#include "emprox/seqmodel.hpp"

namespace oracle {

// O(n^2) Kendall tau-b by direct pair enumeration.
inline double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double concordant = 0, discordant = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0) tx += 1;
      if (dy == 0) ty += 1;
      if (dx == 0 || dy == 0) continue;
      if ((dx > 0) == (dy > 0)) {
        concordant += 1;
      } else {
        discordant += 1;
      }
    }
  }
  const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return (concordant - discordant) / std::sqrt((n0 - tx) * (n0 - ty));
}

// Inverse-distance kNN by full sort with an explicit (distance, index) key.
inline double knn(const emprox::Embedding& q, std::span<const emprox::KnownPoint> known, std::size_t k,
                  double eps) {
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < known.size(); ++i) {
    double s = 0;
    for (std::size_t c = 0; c < q.vector.size(); ++c) {
      s += (q.vector[c] - known[i].embedding.vector[c]) * (q.vector[c] - known[i].embedding.vector[c]);
    }
    dist.emplace_back(std::sqrt(s), i);
  }
  std::sort(dist.begin(), dist.end());
  dist.resize(std::min(k, dist.size()));
  double exact = 0;
  int n_exact = 0;
  for (auto [d, i] : dist) {
    if (d < eps) {
      exact += known[i].accuracy;
      ++n_exact;
    }
  }
  if (n_exact > 0) return exact / n_exact;
  double num = 0, den = 0;
  for (auto [d, i] : dist) {
    const double w = 1 / d;
    num += w * known[i].accuracy;
    den += w;
  }
  return num / den;
}

// Scalar reference forward pass of the sequence autoencoder.
class Reference {
 public:
  explicit Reference(const emprox::EncoderDecoder& m) : m_(m), d_(m.hidden_dim()), v_(m.vocab_size()) {}

  double p(const char* block, std::size_t r, std::size_t c) const {
    const auto& b = m_.block(block);
    return m_.parameters()[b.offset + r * b.cols + c];
  }

  struct State {
    std::vector<double> h, c;
  };

  State lstm(const char* prefix, int token, const State& prev) const {
    const std::string w = std::string(prefix) + ".W", u = std::string(prefix) + ".U",
                      b = std::string(prefix) + ".b";
    std::vector<double> z(4 * d_);
    for (std::size_t r = 0; r < 4 * d_; ++r) {
      double s = p(b.c_str(), r, 0);
      for (std::size_t k = 0; k < d_; ++k) s += p(w.c_str(), r, k) * p("embedding", token, k);
      for (std::size_t k = 0; k < d_; ++k) s += p(u.c_str(), r, k) * prev.h[k];
      z[r] = s;
    }
    auto sig = [](double x) { return 1 / (1 + std::exp(-x)); };
    State out{std::vector<double>(d_), std::vector<double>(d_)};
    for (std::size_t k = 0; k < d_; ++k) {
      const double i = sig(z[k]), f = sig(z[d_ + k]), g = std::tanh(z[2 * d_ + k]), o = sig(z[3 * d_ + k]);
      out.c[k] = f * prev.c[k] + i * g;
      out.h[k] = o * std::tanh(out.c[k]);
    }
    return out;
  }

  std::vector<std::vector<double>> encoder_states(const emprox::TokenSequence& seq) const {
    State s{std::vector<double>(d_), std::vector<double>(d_)};
    std::vector<std::vector<double>> hs;
    for (int t : seq.tokens) {
      s = lstm("encoder", t, s);
      hs.push_back(s.h);
    }
    return hs;
  }

  std::vector<double> embedding(const emprox::TokenSequence& seq) const {
    const auto hs = encoder_states(seq);
    std::vector<double> mean(d_);
    for (const auto& h : hs) {
      for (std::size_t k = 0; k < d_; ++k) mean[k] += h[k] / static_cast<double>(hs.size());
    }
    return mean;
  }

  // Mean negative log-likelihood of seq[1..] under teacher forcing.
  double loss(const emprox::TokenSequence& seq) const {
    const auto hs = encoder_states(seq);
    const auto e = embedding(seq);
    double norm = 0;
    for (double x : e) norm += x * x;
    norm = std::max(std::sqrt(norm), 1e-12);
    State s{std::vector<double>(d_), std::vector<double>(d_)};
    for (std::size_t k = 0; k < d_; ++k) s.h[k] = e[k] / norm;
    double total = 0;
    const std::size_t steps = seq.size() - 1;
    for (std::size_t t = 0; t < steps; ++t) {
      s = lstm("decoder", seq.tokens[t], s);
      std::vector<double> score(hs.size());
      for (std::size_t j = 0; j < hs.size(); ++j) {
        for (std::size_t k = 0; k < d_; ++k) score[j] += s.h[k] * hs[j][k];
        score[j] /= std::sqrt(static_cast<double>(d_));
      }
      double z = 0;
      for (double sc : score) z += std::exp(sc);
      std::vector<double> ctx(d_);
      for (std::size_t j = 0; j < hs.size(); ++j) {
        for (std::size_t k = 0; k < d_; ++k) ctx[k] += std::exp(score[j]) / z * hs[j][k];
      }
      std::vector<double> comb(d_);
      for (std::size_t r = 0; r < d_; ++r) {
        double a = p("attention.b", r, 0);
        for (std::size_t k = 0; k < d_; ++k) a += p("attention.W", r, k) * s.h[k] + p("attention.W", r, d_ + k) * ctx[k];
        comb[r] = std::tanh(a);
      }
      std::vector<double> logit(v_);
      double lz = 0;
      for (std::size_t v = 0; v < v_; ++v) {
        logit[v] = p("output.b", v, 0);
        for (std::size_t k = 0; k < d_; ++k) logit[v] += p("output.W", v, k) * comb[k];
        lz += std::exp(logit[v]);
      }
      total += std::log(lz) - logit[static_cast<std::size_t>(seq.tokens[t + 1])];
    }
    return total / static_cast<double>(steps);
  }

 private:
  const emprox::EncoderDecoder& m_;
  std::size_t d_, v_;
};

inline emprox::Architecture random_arch(std::mt19937_64& g, std::size_t num_ops = 5, std::size_t num_nodes = 4) {
  std::uniform_int_distribution<int> op(0, static_cast<int>(num_ops) - 1);
  emprox::Architecture a{num_nodes, std::vector<int>(emprox::edge_count(num_nodes))};
  for (int& e : a.edge_ops) e = op(g);
  return a;
}

}  // namespace oracle
