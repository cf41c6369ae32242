#include "emprox/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "emprox/errors.hpp"
#include "emprox/rng.hpp"
#include "json.hpp"

namespace emprox {

namespace {

constexpr double kNormFloor = 1e-12;
constexpr int kCheckpointVersion = 1;
constexpr const char* kCheckpointFormat = "emprox-encoder-decoder";

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Batched activations are stored feature-major: a (features x batch) block,
// row-major, so the inner loops run over the batch and vectorise.

void axpy(double a, const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a * x[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// out (r x B) += W (r x k) * X (k x B)
void mm_acc(const double* w, std::size_t r, std::size_t k, const double* x, std::size_t batch,
            double* out) {
  for (std::size_t i = 0; i < r; ++i) {
    double* o = out + i * batch;
    const double* wr = w + i * k;
    for (std::size_t j = 0; j < k; ++j) axpy(wr[j], x + j * batch, o, batch);
  }
}

// out (k x B) += W^T * D with W (r x k), D (r x B)
void mtm_acc(const double* w, std::size_t r, std::size_t k, const double* d, std::size_t batch,
             double* out) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* wr = w + i * k;
    const double* di = d + i * batch;
    for (std::size_t j = 0; j < k; ++j) axpy(wr[j], di, out + j * batch, batch);
  }
}

// g (r x k) += D (r x B) * X^T with X (k x B)
void outer_acc(const double* d, std::size_t r, const double* x, std::size_t k, std::size_t batch,
               double* g) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < k; ++j) g[i * k + j] += dot(d + i * batch, x + j * batch, batch);
  }
}

void row_sums_acc(const double* d, std::size_t r, std::size_t batch, double* out) {
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t b = 0; b < batch; ++b) s += d[i * batch + b];
    out[i] += s;
  }
}

struct Offsets {
  std::size_t embedding, enc_w, enc_u, enc_b, dec_w, dec_u, dec_b, att_w, att_b, out_w, out_b;
};

Offsets offsets_of(const std::vector<ParamBlock>& layout) {
  return {layout[0].offset, layout[1].offset, layout[2].offset, layout[3].offset,
          layout[4].offset, layout[5].offset, layout[6].offset, layout[7].offset,
          layout[8].offset, layout[9].offset, layout[10].offset};
}

struct LstmStep {
  std::vector<double> gates;  // 4d x B, activated [input forget cell output]
  std::vector<double> c;      // d x B
  std::vector<double> tanh_c;
  std::vector<double> h;
};

// proj (V x 4d): W * embedding[v] + b for every token v.
std::vector<double> input_projection(const double* emb, const double* w, const double* bias,
                                     std::size_t vocab, std::size_t d) {
  const std::size_t g = 4 * d;
  std::vector<double> proj(vocab * g);
  for (std::size_t v = 0; v < vocab; ++v) {
    for (std::size_t r = 0; r < g; ++r) proj[v * g + r] = bias[r] + dot(w + r * d, emb + v * d, d);
  }
  return proj;
}

void lstm_forward(const std::vector<double>& proj, const double* u, const TokenId* tokens,
                  const double* h_prev, const double* c_prev, std::size_t d, std::size_t batch,
                  LstmStep& out) {
  const std::size_t g = 4 * d;
  out.gates.assign(g * batch, 0.0);
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t b = 0; b < batch; ++b) {
      out.gates[r * batch + b] = proj[static_cast<std::size_t>(tokens[b]) * g + r];
    }
  }
  mm_acc(u, g, d, h_prev, batch, out.gates.data());
  double* z = out.gates.data();
  for (std::size_t i = 0; i < 2 * d * batch; ++i) z[i] = sigmoid(z[i]);
  for (std::size_t i = 2 * d * batch; i < 3 * d * batch; ++i) z[i] = std::tanh(z[i]);
  for (std::size_t i = 3 * d * batch; i < 4 * d * batch; ++i) z[i] = sigmoid(z[i]);

  const std::size_t n = d * batch;
  out.c.resize(n);
  out.tanh_c.resize(n);
  out.h.resize(n);
  const double* ig = z;
  const double* fg = z + n;
  const double* cg = z + 2 * n;
  const double* og = z + 3 * n;
  for (std::size_t i = 0; i < n; ++i) {
    out.c[i] = fg[i] * c_prev[i] + ig[i] * cg[i];
    out.tanh_c[i] = std::tanh(out.c[i]);
    out.h[i] = og[i] * out.tanh_c[i];
  }
}

// dh: total gradient into h of this step. dc: in = gradient from the next step
// into c, out = gradient into c_prev. dh_prev is overwritten.
void lstm_backward(const double* u, const TokenId* tokens, const double* h_prev,
                   const double* c_prev, const LstmStep& st, std::size_t d, std::size_t batch,
                   const double* dh, double* dc, double* dh_prev, double* du, double* dz_sum,
                   std::vector<double>& dz) {
  const std::size_t n = d * batch;
  const std::size_t g = 4 * d;
  dz.assign(g * batch, 0.0);
  const double* ig = st.gates.data();
  const double* fg = ig + n;
  const double* cg = ig + 2 * n;
  const double* og = ig + 3 * n;
  for (std::size_t i = 0; i < n; ++i) {
    const double tc = st.tanh_c[i];
    const double d_o = dh[i] * tc;
    const double dct = dc[i] + dh[i] * og[i] * (1.0 - tc * tc);
    dz[i] = dct * cg[i] * ig[i] * (1.0 - ig[i]);
    dz[n + i] = dct * c_prev[i] * fg[i] * (1.0 - fg[i]);
    dz[2 * n + i] = dct * ig[i] * (1.0 - cg[i] * cg[i]);
    dz[3 * n + i] = d_o * og[i] * (1.0 - og[i]);
    dc[i] = dct * fg[i];
  }
  outer_acc(dz.data(), g, h_prev, d, batch, du);
  std::fill(dh_prev, dh_prev + n, 0.0);
  mtm_acc(u, g, d, dz.data(), batch, dh_prev);
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t b = 0; b < batch; ++b) {
      dz_sum[static_cast<std::size_t>(tokens[b]) * g + r] += dz[r * batch + b];
    }
  }
}

// Gradients of the input projection back into W, b and the embedding table.
void input_projection_backward(const double* dz_sum, const double* emb, const double* w,
                               std::size_t vocab, std::size_t d, double* dw, double* db,
                               double* demb) {
  const std::size_t g = 4 * d;
  for (std::size_t v = 0; v < vocab; ++v) {
    const double* dzv = dz_sum + v * g;
    const double* ev = emb + v * d;
    double* dev = demb + v * d;
    for (std::size_t r = 0; r < g; ++r) {
      if (dzv[r] == 0.0) continue;
      axpy(dzv[r], ev, dw + r * d, d);
      db[r] += dzv[r];
      axpy(dzv[r], w + r * d, dev, d);
    }
  }
}

// One forward pass over a batch. Tokens are step-major: tokens[t * batch + b].
class Pass {
 public:
  Pass(const EncoderDecoder& model) : model_(model), off_(offsets_of(model.layout())) {
    d_ = model.hidden_dim();
    vocab_ = model.vocab_size();
    p_ = model.parameters().data();
  }

  void check_tokens(std::span<const TokenId> tokens) const {
    for (TokenId t : tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_) {
        throw InputError("token " + std::to_string(t) + " outside vocabulary of size " +
                         std::to_string(vocab_));
      }
    }
  }

  void encoder(std::vector<TokenId> tokens, std::size_t steps, std::size_t batch) {
    check_tokens(tokens);
    enc_tokens_ = std::move(tokens);
    t_enc_ = steps;
    batch_ = batch;
    enc_proj_ = input_projection(p_ + off_.embedding, p_ + off_.enc_w, p_ + off_.enc_b, vocab_, d_);
    zeros_.assign(d_ * batch_, 0.0);
    enc_.assign(steps, {});
    for (std::size_t t = 0; t < steps; ++t) {
      const double* hp = t == 0 ? zeros_.data() : enc_[t - 1].h.data();
      const double* cp = t == 0 ? zeros_.data() : enc_[t - 1].c.data();
      lstm_forward(enc_proj_, p_ + off_.enc_u, enc_tokens_.data() + t * batch_, hp, cp, d_, batch_,
                   enc_[t]);
    }
    enc_states_.resize(steps);
    for (std::size_t t = 0; t < steps; ++t) enc_states_[t] = enc_[t].h;
    mean_.assign(d_ * batch_, 0.0);
    for (std::size_t t = 0; t < steps; ++t) axpy(1.0, enc_[t].h.data(), mean_.data(), d_ * batch_);
    for (double& x : mean_) x /= static_cast<double>(steps);
  }

  // Supply encoder output directly (decode from an externally held state).
  void set_encoder_output(std::vector<std::vector<double>> states, std::vector<double> mean,
                          std::size_t batch) {
    t_enc_ = states.size();
    enc_states_ = std::move(states);
    mean_ = std::move(mean);
    batch_ = batch;
    zeros_.assign(d_ * batch_, 0.0);
  }

  // Teacher-forced decoder over `inputs` (steps x batch).
  void decoder(std::vector<TokenId> inputs, std::size_t steps) {
    check_tokens(inputs);
    dec_tokens_ = std::move(inputs);
    t_dec_ = steps;
    const std::size_t n = d_ * batch_;
    norms_.assign(batch_, 0.0);
    h0_.assign(n, 0.0);
    for (std::size_t b = 0; b < batch_; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < d_; ++k) s += mean_[k * batch_ + b] * mean_[k * batch_ + b];
      norms_[b] = std::sqrt(s);
      const double denom = std::max(norms_[b], kNormFloor);
      for (std::size_t k = 0; k < d_; ++k) h0_[k * batch_ + b] = mean_[k * batch_ + b] / denom;
    }
    dec_proj_ = input_projection(p_ + off_.embedding, p_ + off_.dec_w, p_ + off_.dec_b, vocab_, d_);
    dec_.assign(steps, {});
    alpha_.assign(steps, {});
    cat_.assign(steps, {});
    comb_.assign(steps, {});
    logits_.assign(steps, {});
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_));
    for (std::size_t s = 0; s < steps; ++s) {
      const double* hp = s == 0 ? h0_.data() : dec_[s - 1].h.data();
      const double* cp = s == 0 ? zeros_.data() : dec_[s - 1].c.data();
      lstm_forward(dec_proj_, p_ + off_.dec_u, dec_tokens_.data() + s * batch_, hp, cp, d_, batch_,
                   dec_[s]);
      const double* h = dec_[s].h.data();

      auto& alpha = alpha_[s];
      alpha.assign(t_enc_ * batch_, 0.0);
      for (std::size_t j = 0; j < t_enc_; ++j) {
        const double* hj = enc_states_[j].data();
        double* aj = alpha.data() + j * batch_;
        for (std::size_t k = 0; k < d_; ++k) {
          for (std::size_t b = 0; b < batch_; ++b) aj[b] += h[k * batch_ + b] * hj[k * batch_ + b];
        }
        for (std::size_t b = 0; b < batch_; ++b) aj[b] *= scale;
      }
      for (std::size_t b = 0; b < batch_; ++b) {
        double mx = alpha[b];
        for (std::size_t j = 1; j < t_enc_; ++j) mx = std::max(mx, alpha[j * batch_ + b]);
        double z = 0.0;
        for (std::size_t j = 0; j < t_enc_; ++j) {
          alpha[j * batch_ + b] = std::exp(alpha[j * batch_ + b] - mx);
          z += alpha[j * batch_ + b];
        }
        for (std::size_t j = 0; j < t_enc_; ++j) alpha[j * batch_ + b] /= z;
      }

      auto& cat = cat_[s];
      cat.assign(2 * n, 0.0);
      std::copy(h, h + n, cat.begin());
      double* ctx = cat.data() + n;
      for (std::size_t j = 0; j < t_enc_; ++j) {
        const double* hj = enc_states_[j].data();
        const double* aj = alpha.data() + j * batch_;
        for (std::size_t k = 0; k < d_; ++k) {
          for (std::size_t b = 0; b < batch_; ++b) ctx[k * batch_ + b] += aj[b] * hj[k * batch_ + b];
        }
      }

      auto& comb = comb_[s];
      comb.assign(n, 0.0);
      for (std::size_t k = 0; k < d_; ++k) {
        for (std::size_t b = 0; b < batch_; ++b) comb[k * batch_ + b] = p_[off_.att_b + k];
      }
      mm_acc(p_ + off_.att_w, d_, 2 * d_, cat.data(), batch_, comb.data());
      for (double& x : comb) x = std::tanh(x);

      auto& logits = logits_[s];
      logits.assign(vocab_ * batch_, 0.0);
      for (std::size_t v = 0; v < vocab_; ++v) {
        for (std::size_t b = 0; b < batch_; ++b) logits[v * batch_ + b] = p_[off_.out_b + v];
      }
      mm_acc(p_ + off_.out_w, vocab_, d_, comb.data(), batch_, logits.data());
    }
  }

  // Mean over batch and steps of -log p(target). Also caches softmax probabilities.
  double loss(std::span<const TokenId> targets) {
    probs_.assign(t_dec_, {});
    double total = 0.0;
    for (std::size_t s = 0; s < t_dec_; ++s) {
      const auto& logits = logits_[s];
      auto& probs = probs_[s];
      probs.assign(vocab_ * batch_, 0.0);
      for (std::size_t b = 0; b < batch_; ++b) {
        double mx = logits[b];
        for (std::size_t v = 1; v < vocab_; ++v) mx = std::max(mx, logits[v * batch_ + b]);
        double z = 0.0;
        for (std::size_t v = 0; v < vocab_; ++v) {
          probs[v * batch_ + b] = std::exp(logits[v * batch_ + b] - mx);
          z += probs[v * batch_ + b];
        }
        for (std::size_t v = 0; v < vocab_; ++v) probs[v * batch_ + b] /= z;
        const auto tgt = static_cast<std::size_t>(targets[s * batch_ + b]);
        total += -(logits[tgt * batch_ + b] - mx - std::log(z));
      }
    }
    return total / static_cast<double>(t_dec_ * batch_);
  }

  // Reverse pass; requires encoder() + decoder() + loss() on the same batch.
  std::vector<double> backward(std::span<const TokenId> targets) const {
    std::vector<double> grad(model_.parameter_count(), 0.0);
    double* g = grad.data();
    const std::size_t n = d_ * batch_;
    const double inv = 1.0 / static_cast<double>(t_dec_ * batch_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_));

    std::vector<std::vector<double>> d_enc_h(t_enc_, std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> d_dec_h(t_dec_, std::vector<double>(n, 0.0));
    std::vector<double> dlogits(vocab_ * batch_), dcomb(n), dcat(2 * n), dalpha(t_enc_ * batch_);

    for (std::size_t s = 0; s < t_dec_; ++s) {
      for (std::size_t i = 0; i < vocab_ * batch_; ++i) dlogits[i] = probs_[s][i] * inv;
      for (std::size_t b = 0; b < batch_; ++b) {
        dlogits[static_cast<std::size_t>(targets[s * batch_ + b]) * batch_ + b] -= inv;
      }
      outer_acc(dlogits.data(), vocab_, comb_[s].data(), d_, batch_, g + off_.out_w);
      row_sums_acc(dlogits.data(), vocab_, batch_, g + off_.out_b);
      std::fill(dcomb.begin(), dcomb.end(), 0.0);
      mtm_acc(p_ + off_.out_w, vocab_, d_, dlogits.data(), batch_, dcomb.data());
      for (std::size_t i = 0; i < n; ++i) dcomb[i] *= 1.0 - comb_[s][i] * comb_[s][i];
      outer_acc(dcomb.data(), d_, cat_[s].data(), 2 * d_, batch_, g + off_.att_w);
      row_sums_acc(dcomb.data(), d_, batch_, g + off_.att_b);
      std::fill(dcat.begin(), dcat.end(), 0.0);
      mtm_acc(p_ + off_.att_w, d_, 2 * d_, dcomb.data(), batch_, dcat.data());

      double* dh = d_dec_h[s].data();
      axpy(1.0, dcat.data(), dh, n);
      const double* dctx = dcat.data() + n;
      const double* h = dec_[s].h.data();
      const auto& alpha = alpha_[s];

      std::fill(dalpha.begin(), dalpha.end(), 0.0);
      for (std::size_t j = 0; j < t_enc_; ++j) {
        const double* hj = enc_states_[j].data();
        double* dhj = d_enc_h[j].data();
        const double* aj = alpha.data() + j * batch_;
        double* daj = dalpha.data() + j * batch_;
        for (std::size_t k = 0; k < d_; ++k) {
          for (std::size_t b = 0; b < batch_; ++b) {
            daj[b] += dctx[k * batch_ + b] * hj[k * batch_ + b];
            dhj[k * batch_ + b] += aj[b] * dctx[k * batch_ + b];
          }
        }
      }
      // softmax backward, then through the scaled dot product
      for (std::size_t b = 0; b < batch_; ++b) {
        double m = 0.0;
        for (std::size_t j = 0; j < t_enc_; ++j) m += alpha[j * batch_ + b] * dalpha[j * batch_ + b];
        for (std::size_t j = 0; j < t_enc_; ++j) {
          dalpha[j * batch_ + b] = alpha[j * batch_ + b] * (dalpha[j * batch_ + b] - m) * scale;
        }
      }
      for (std::size_t j = 0; j < t_enc_; ++j) {
        const double* hj = enc_states_[j].data();
        double* dhj = d_enc_h[j].data();
        const double* dsj = dalpha.data() + j * batch_;
        for (std::size_t k = 0; k < d_; ++k) {
          for (std::size_t b = 0; b < batch_; ++b) {
            dh[k * batch_ + b] += dsj[b] * hj[k * batch_ + b];
            dhj[k * batch_ + b] += dsj[b] * h[k * batch_ + b];
          }
        }
      }
    }

    const std::size_t gsz = 4 * d_;
    std::vector<double> dz;
    std::vector<double> dc(n, 0.0), dh_carry(n, 0.0), dh_prev(n), dh_total(n);
    std::vector<double> dz_dec(vocab_ * gsz, 0.0);
    for (std::size_t s = t_dec_; s-- > 0;) {
      for (std::size_t i = 0; i < n; ++i) dh_total[i] = d_dec_h[s][i] + dh_carry[i];
      const double* hp = s == 0 ? h0_.data() : dec_[s - 1].h.data();
      const double* cp = s == 0 ? zeros_.data() : dec_[s - 1].c.data();
      lstm_backward(p_ + off_.dec_u, dec_tokens_.data() + s * batch_, hp, cp, dec_[s], d_, batch_,
                    dh_total.data(), dc.data(), dh_prev.data(), g + off_.dec_u, dz_dec.data(), dz);
      dh_carry.swap(dh_prev);
    }
    input_projection_backward(dz_dec.data(), p_ + off_.embedding, p_ + off_.dec_w, vocab_, d_,
                              g + off_.dec_w, g + off_.dec_b, g + off_.embedding);

    // h0 = mean / max(|mean|, floor), per column
    std::vector<double> dmean(n, 0.0);
    for (std::size_t b = 0; b < batch_; ++b) {
      if (norms_[b] > kNormFloor) {
        double yd = 0.0;
        for (std::size_t k = 0; k < d_; ++k) yd += h0_[k * batch_ + b] * dh_carry[k * batch_ + b];
        for (std::size_t k = 0; k < d_; ++k) {
          const std::size_t i = k * batch_ + b;
          dmean[i] = (dh_carry[i] - h0_[i] * yd) / norms_[b];
        }
      } else {
        for (std::size_t k = 0; k < d_; ++k) dmean[k * batch_ + b] = dh_carry[k * batch_ + b] / kNormFloor;
      }
    }
    const double inv_steps = 1.0 / static_cast<double>(t_enc_);
    for (std::size_t t = 0; t < t_enc_; ++t) axpy(inv_steps, dmean.data(), d_enc_h[t].data(), n);

    std::fill(dc.begin(), dc.end(), 0.0);
    std::fill(dh_carry.begin(), dh_carry.end(), 0.0);
    std::vector<double> dz_enc(vocab_ * gsz, 0.0);
    for (std::size_t t = t_enc_; t-- > 0;) {
      for (std::size_t i = 0; i < n; ++i) dh_total[i] = d_enc_h[t][i] + dh_carry[i];
      const double* hp = t == 0 ? zeros_.data() : enc_[t - 1].h.data();
      const double* cp = t == 0 ? zeros_.data() : enc_[t - 1].c.data();
      lstm_backward(p_ + off_.enc_u, enc_tokens_.data() + t * batch_, hp, cp, enc_[t], d_, batch_,
                    dh_total.data(), dc.data(), dh_prev.data(), g + off_.enc_u, dz_enc.data(), dz);
      dh_carry.swap(dh_prev);
    }
    input_projection_backward(dz_enc.data(), p_ + off_.embedding, p_ + off_.enc_w, vocab_, d_,
                              g + off_.enc_w, g + off_.enc_b, g + off_.embedding);
    return grad;
  }

  std::size_t batch() const noexcept { return batch_; }
  std::size_t decoder_steps() const noexcept { return t_dec_; }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const std::vector<std::vector<double>>& encoder_states() const noexcept { return enc_states_; }
  const std::vector<double>& logits(std::size_t s) const { return logits_[s]; }
  const std::vector<double>& alpha(std::size_t s) const { return alpha_[s]; }

 private:
  const EncoderDecoder& model_;
  Offsets off_;
  const double* p_ = nullptr;
  std::size_t d_ = 0, vocab_ = 0, batch_ = 0, t_enc_ = 0, t_dec_ = 0;

  std::vector<TokenId> enc_tokens_, dec_tokens_;
  std::vector<double> enc_proj_, dec_proj_, zeros_, mean_, norms_, h0_;
  std::vector<LstmStep> enc_, dec_;
  std::vector<std::vector<double>> enc_states_, alpha_, cat_, comb_, logits_, probs_;
};

struct Batch {
  std::size_t steps = 0;
  std::size_t size = 0;
  std::vector<TokenId> tokens;  // step-major
  std::vector<TokenId> dec_inputs;
  std::vector<TokenId> targets;
};

Batch make_batch(std::span<const TokenSequence> corpus) {
  if (corpus.empty()) throw InputError("corpus is empty");
  Batch batch;
  batch.steps = corpus.front().size();
  batch.size = corpus.size();
  if (batch.steps < 2) throw InputError("sequences need at least two tokens");
  for (const auto& seq : corpus) {
    if (seq.size() != batch.steps) throw InputError("all sequences in a batch must share a length");
  }
  batch.tokens.resize(batch.steps * batch.size);
  for (std::size_t t = 0; t < batch.steps; ++t) {
    for (std::size_t b = 0; b < batch.size; ++b) batch.tokens[t * batch.size + b] = corpus[b].tokens[t];
  }
  const std::size_t dec_steps = batch.steps - 1;
  batch.dec_inputs.assign(batch.tokens.begin(),
                          batch.tokens.begin() + static_cast<std::ptrdiff_t>(dec_steps * batch.size));
  batch.targets.assign(batch.tokens.begin() + static_cast<std::ptrdiff_t>(batch.size), batch.tokens.end());
  return batch;
}

void run_batch(Pass& pass, const Batch& batch) {
  pass.encoder(batch.tokens, batch.steps, batch.size);
  pass.decoder(batch.dec_inputs, batch.steps - 1);
}

std::vector<std::vector<double>> states_from_matrix(const Matrix& states) {
  std::vector<std::vector<double>> out(states.rows);
  for (std::size_t t = 0; t < states.rows; ++t) out[t].assign(states.row(t).begin(), states.row(t).end());
  return out;
}

void check_decoder_inputs(const EncoderDecoder& model, const Embedding& e, const Matrix& states) {
  if (e.vector.size() != model.hidden_dim()) {
    throw ConfigError("embedding has dimension " + std::to_string(e.vector.size()) +
                      ", model expects " + std::to_string(model.hidden_dim()));
  }
  if (states.cols != model.hidden_dim() || states.rows == 0) {
    throw ConfigError("encoder states do not match the model hidden dimension");
  }
}

}  // namespace

bool all_finite(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

void ModelConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be at least 2");
  if (hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  if (num_layers != 1) throw ConfigError("only single-layer models are supported");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale must be non-negative");
}

std::vector<ParamBlock> parameter_layout(std::size_t vocab_size, std::size_t hidden_dim) {
  const std::size_t d = hidden_dim;
  const std::size_t v = vocab_size;
  std::vector<ParamBlock> layout{
      {"embedding", v, d, 0},       {"encoder.W", 4 * d, d, 0},   {"encoder.U", 4 * d, d, 0},
      {"encoder.b", 4 * d, 1, 0},   {"decoder.W", 4 * d, d, 0},   {"decoder.U", 4 * d, d, 0},
      {"decoder.b", 4 * d, 1, 0},   {"attention.W", d, 2 * d, 0}, {"attention.b", d, 1, 0},
      {"output.W", v, d, 0},        {"output.b", v, 1, 0},
  };
  std::size_t offset = 0;
  for (auto& block : layout) {
    block.offset = offset;
    offset += block.size();
  }
  return layout;
}

EncoderDecoder::EncoderDecoder(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  layout_ = parameter_layout(cfg_.vocab_size, cfg_.hidden_dim);
  params_.assign(layout_.back().offset + layout_.back().size(), 0.0);
}

EncoderDecoder EncoderDecoder::initialized(const ModelConfig& cfg) {
  EncoderDecoder model(cfg);
  Rng rng(derive_seed(cfg.seed, 0x1417));
  for (double& p : model.params_) p = rng.uniform(-cfg.init_scale, cfg.init_scale);
  return model;
}

const ParamBlock& EncoderDecoder::block(const std::string& name) const {
  for (const auto& b : layout_) {
    if (b.name == name) return b;
  }
  throw ConfigError("no parameter block named '" + name + "'");
}

std::string EncoderDecoder::to_json_string() const {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = {{"vocab_size", cfg_.vocab_size},     {"hidden_dim", cfg_.hidden_dim},
                 {"num_layers", cfg_.num_layers},     {"teacher_forcing", cfg_.teacher_forcing},
                 {"epochs", cfg_.epochs},             {"learning_rate", cfg_.learning_rate},
                 {"beta1", cfg_.beta1},               {"beta2", cfg_.beta2},
                 {"adam_eps", cfg_.adam_eps},         {"init_scale", cfg_.init_scale},
                 {"seed", cfg_.seed}};
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& b : layout_) {
    tensors.push_back({{"name", b.name},
                       {"shape", {b.rows, b.cols}},
                       {"data", std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                                    params_.begin() + static_cast<std::ptrdiff_t>(b.offset + b.size()))}});
  }
  j["tensors"] = std::move(tensors);
  return j.dump();
}

EncoderDecoder EncoderDecoder::from_json_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != kCheckpointFormat) throw InputError("not an encoder-decoder checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw InputError("unsupported checkpoint version " + j.at("version").dump());
    }
    const auto& c = j.at("config");
    ModelConfig cfg;
    cfg.vocab_size = c.at("vocab_size").get<std::size_t>();
    cfg.hidden_dim = c.at("hidden_dim").get<std::size_t>();
    cfg.num_layers = c.at("num_layers").get<std::size_t>();
    cfg.teacher_forcing = c.at("teacher_forcing").get<bool>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.beta1 = c.at("beta1").get<double>();
    cfg.beta2 = c.at("beta2").get<double>();
    cfg.adam_eps = c.at("adam_eps").get<double>();
    cfg.init_scale = c.at("init_scale").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    EncoderDecoder model(cfg);
    const auto& tensors = j.at("tensors");
    if (tensors.size() != model.layout_.size()) throw InputError("checkpoint has wrong tensor count");
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto& t = tensors[i];
      const auto& b = model.layout_[i];
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      if (t.at("name").get<std::string>() != b.name || shape.size() != 2 || shape[0] != b.rows ||
          shape[1] != b.cols) {
        throw InputError("checkpoint tensor '" + t.at("name").get<std::string>() +
                         "' does not match the expected shape of '" + b.name + "'");
      }
      const auto data = t.at("data").get<std::vector<double>>();
      if (data.size() != b.size()) throw InputError("checkpoint tensor '" + b.name + "' has wrong length");
      std::copy(data.begin(), data.end(), model.params_.begin() + static_cast<std::ptrdiff_t>(b.offset));
    }
    if (!all_finite(model.params_)) throw NumericError("checkpoint contains non-finite parameters");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
}

void EncoderDecoder::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << to_json_string() << '\n';
}

EncoderDecoder EncoderDecoder::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_string(buf.str());
}

Embedding normalize(const Embedding& e) {
  double s = 0.0;
  for (double x : e.vector) s += x * x;
  const double norm = std::sqrt(s);
  if (!(norm >= kNormFloor)) throw DegenerateEmbeddingError("embedding norm below 1e-12");
  Embedding out{e.vector, true};
  for (double& x : out.vector) x /= norm;
  return out;
}

EncoderOutput encode(const EncoderDecoder& model, const TokenSequence& seq) {
  if (seq.tokens.empty()) throw InputError("cannot encode an empty sequence");
  Pass pass(model);
  pass.encoder(seq.tokens, seq.size(), 1);
  EncoderOutput out;
  out.embedding.vector = pass.mean();
  out.states = Matrix(seq.size(), model.hidden_dim());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    std::copy(pass.encoder_states()[t].begin(), pass.encoder_states()[t].end(), out.states.row(t).begin());
  }
  if (!all_finite(out.embedding.vector)) throw NumericError("non-finite embedding");
  return out;
}

DecoderOutput decode(const EncoderDecoder& model, const Embedding& e, const Matrix& encoder_states,
                     const TokenSequence& target) {
  check_decoder_inputs(model, e, encoder_states);
  if (target.size() < 2) throw InputError("target needs at least two tokens");
  Pass pass(model);
  pass.set_encoder_output(states_from_matrix(encoder_states), e.vector, 1);
  const std::size_t steps = target.size() - 1;
  pass.decoder(std::vector<TokenId>(target.tokens.begin(), target.tokens.end() - 1), steps);
  DecoderOutput out{Matrix(steps, model.vocab_size()), Matrix(steps, encoder_states.rows)};
  for (std::size_t s = 0; s < steps; ++s) {
    std::copy(pass.logits(s).begin(), pass.logits(s).end(), out.logits.row(s).begin());
    std::copy(pass.alpha(s).begin(), pass.alpha(s).end(), out.attention.row(s).begin());
  }
  if (!all_finite(out.logits.data)) throw NumericError("non-finite logits");
  return out;
}

double nll_loss(const Matrix& logits, const TokenSequence& target) {
  if (target.size() < 2 || logits.rows != target.size() - 1) {
    throw InputError("logits need one row per target position after SOS");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < logits.rows; ++s) {
    const auto row = logits.row(s);
    const auto tgt = static_cast<std::size_t>(target.tokens[s + 1]);
    if (tgt >= row.size()) throw InputError("target token outside logits width");
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double x : row) z += std::exp(x - mx);
    total += std::log(z) - (row[tgt] - mx);
  }
  return total / static_cast<double>(logits.rows);
}

std::vector<TokenId> greedy_decode(const EncoderDecoder& model, const Embedding& e,
                                   const Matrix& encoder_states, TokenId sos, std::size_t length) {
  check_decoder_inputs(model, e, encoder_states);
  // Re-running the prefix each step keeps one code path; sequences are short.
  std::vector<TokenId> inputs{sos};
  std::vector<TokenId> out;
  for (std::size_t s = 0; s < length; ++s) {
    Pass pass(model);
    pass.set_encoder_output(states_from_matrix(encoder_states), e.vector, 1);
    pass.decoder(inputs, inputs.size());
    const auto& logits = pass.logits(inputs.size() - 1);
    const auto best = static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    out.push_back(best);
    inputs.push_back(best);
  }
  return out;
}

LossGradient loss_and_gradient(const EncoderDecoder& model, std::span<const TokenSequence> corpus) {
  const Batch batch = make_batch(corpus);
  Pass pass(model);
  run_batch(pass, batch);
  LossGradient out;
  out.loss = pass.loss(batch.targets);
  out.gradient = pass.backward(batch.targets);
  return out;
}

double corpus_loss(const EncoderDecoder& model, std::span<const TokenSequence> corpus) {
  const Batch batch = make_batch(corpus);
  Pass pass(model);
  run_batch(pass, batch);
  return pass.loss(batch.targets);
}

TrainResult train_autoencoder(std::span<const TokenSequence> corpus, const ModelConfig& cfg) {
  cfg.validate();
  const Batch batch = make_batch(corpus);
  TrainResult result{EncoderDecoder::initialized(cfg), {}};
  auto params = result.model.parameters();
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  double b1t = 1.0, b2t = 1.0;
  result.losses.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Pass pass(result.model);
    run_batch(pass, batch);
    const double loss = pass.loss(batch.targets);
    if (!std::isfinite(loss)) throw TrainingDivergenceError(epoch);
    const auto grad = pass.backward(batch.targets);
    if (!all_finite(grad)) throw TrainingDivergenceError(epoch);
    result.losses.push_back(loss);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / (1.0 - b1t);
      const double vhat = v[i] / (1.0 - b2t);
      params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
  if (!all_finite(params)) throw TrainingDivergenceError(cfg.epochs);
  return result;
}

double grad_check(const EncoderDecoder& model, const TokenSequence& seq, double step) {
  const std::span<const TokenSequence> corpus(&seq, 1);
  const auto analytic = loss_and_gradient(model, corpus).gradient;
  EncoderDecoder probe = model;
  auto params = probe.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = corpus_loss(probe, corpus);
    params[i] = saved - step;
    const double down = corpus_loss(probe, corpus);
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1.0, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

double reconstruction_accuracy(const EncoderDecoder& model, std::span<const TokenSequence> corpus,
                               const OperationVocabulary& vocab) {
  const Batch batch = make_batch(corpus);
  Pass pass(model);
  run_batch(pass, batch);
  std::size_t hits = 0, total = 0;
  for (std::size_t s = 0; s + 1 < batch.steps; ++s) {
    const auto& logits = pass.logits(s);
    for (std::size_t b = 0; b < batch.size; ++b) {
      const TokenId tgt = batch.targets[s * batch.size + b];
      if (!vocab.is_op_token(tgt)) continue;
      std::size_t best = 0;
      for (std::size_t v = 1; v < model.vocab_size(); ++v) {
        if (logits[v * batch.size + b] > logits[best * batch.size + b]) best = v;
      }
      hits += static_cast<std::size_t>(best) == static_cast<std::size_t>(tgt) ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace emprox
