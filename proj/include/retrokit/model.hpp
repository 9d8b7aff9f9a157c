#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "retrokit/matrix.hpp"
#include "retrokit/vocab.hpp"

namespace retro::model {

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 128;
  int n_heads = 4;
  int n_enc_layers = 3;
  int n_dec_layers = 3;
  int d_ff = 256;
  double dropout_p = 0.1;
  int max_len = 256;
  int latent_classes = 1;  // K

  void validate() const;
};

struct DropoutMode {
  bool on = false;
  uint64_t seed = 0;

  static DropoutMode off() { return {}; }
  static DropoutMode with_seed(uint64_t s) { return {true, s}; }
};

struct LinearP {
  Matrix w;  // in x out
  Matrix b;  // 1 x out
};

struct NormP {
  Matrix gamma;  // 1 x d
  Matrix beta;   // 1 x d
};

struct AttnP {
  LinearP q, k, v, o;
};

struct EncLayerP {
  NormP norm1;
  AttnP self_attn;
  NormP norm2;
  LinearP ff1, ff2;
};

struct DecLayerP {
  NormP norm1;
  AttnP self_attn;
  NormP norm2;
  AttnP cross_attn;
  NormP norm3;
  LinearP ff1, ff2;
};

struct ModelParams {
  ModelConfig cfg;
  Matrix token_embedding;   // V x d
  Matrix positional;        // max_len x d; derived, not trained
  Matrix latent_embedding;  // K x d
  std::vector<EncLayerP> enc;
  NormP enc_final;
  std::vector<DecLayerP> dec;
  NormP dec_final;
  LinearP out_proj;  // d x V
};

// Visits every tensor in declaration order (the checkpoint order).
// f(name, matrix&, trainable).
template <class P, class F>
void visit_tensors(P& p, F&& f) {
  f("token_embedding", p.token_embedding, true);
  f("positional", p.positional, false);
  f("latent_embedding", p.latent_embedding, true);
  auto attn = [&](const std::string& prefix, auto& a) {
    f((prefix + ".q.w").c_str(), a.q.w, true);
    f((prefix + ".q.b").c_str(), a.q.b, true);
    f((prefix + ".k.w").c_str(), a.k.w, true);
    f((prefix + ".k.b").c_str(), a.k.b, true);
    f((prefix + ".v.w").c_str(), a.v.w, true);
    f((prefix + ".v.b").c_str(), a.v.b, true);
    f((prefix + ".o.w").c_str(), a.o.w, true);
    f((prefix + ".o.b").c_str(), a.o.b, true);
  };
  auto norm = [&](const std::string& prefix, auto& nrm) {
    f((prefix + ".gamma").c_str(), nrm.gamma, true);
    f((prefix + ".beta").c_str(), nrm.beta, true);
  };
  for (size_t l = 0; l < p.enc.size(); ++l) {
    std::string pre = "enc." + std::to_string(l);
    norm(pre + ".norm1", p.enc[l].norm1);
    attn(pre + ".self", p.enc[l].self_attn);
    norm(pre + ".norm2", p.enc[l].norm2);
    f((pre + ".ff1.w").c_str(), p.enc[l].ff1.w, true);
    f((pre + ".ff1.b").c_str(), p.enc[l].ff1.b, true);
    f((pre + ".ff2.w").c_str(), p.enc[l].ff2.w, true);
    f((pre + ".ff2.b").c_str(), p.enc[l].ff2.b, true);
  }
  norm("enc_final", p.enc_final);
  for (size_t l = 0; l < p.dec.size(); ++l) {
    std::string pre = "dec." + std::to_string(l);
    norm(pre + ".norm1", p.dec[l].norm1);
    attn(pre + ".self", p.dec[l].self_attn);
    norm(pre + ".norm2", p.dec[l].norm2);
    attn(pre + ".cross", p.dec[l].cross_attn);
    norm(pre + ".norm3", p.dec[l].norm3);
    f((pre + ".ff1.w").c_str(), p.dec[l].ff1.w, true);
    f((pre + ".ff1.b").c_str(), p.dec[l].ff1.b, true);
    f((pre + ".ff2.w").c_str(), p.dec[l].ff2.w, true);
    f((pre + ".ff2.b").c_str(), p.dec[l].ff2.b, true);
  }
  norm("dec_final", p.dec_final);
  f("out_proj.w", p.out_proj.w, true);
  f("out_proj.b", p.out_proj.b, true);
}

ModelParams init_params(const ModelConfig& cfg, uint64_t seed);
ModelParams zeros_like(const ModelParams& p);

// Trainable scalar count; the closed form is documented in the README.
size_t param_count(const ModelConfig& cfg);

// --- forward / backward ------------------------------------------------------

// Encoder output for a source id sequence (L x d).
Matrix encode(const ModelParams& p, const std::vector<int>& src, DropoutMode dm);

// Per-position next-token log-probabilities. Row t conditions on the source,
// the latent class z (1-based) and decoder inputs [BOS, y_prefix[0..t-1]].
// Output has |y_prefix|+1 rows.
Matrix forward(const ModelParams& p, const std::vector<int>& src,
               const std::vector<int>& y_prefix, int z, DropoutMode dm);

// log p(y | x, z): y is the realized decoder output (normally ending in EOS).
double sequence_log_prob(const ModelParams& p, const std::vector<int>& src,
                         const std::vector<int>& y, int z, DropoutMode dm);

// Eq-style mixture with uniform prior over z in 1..K, via log-sum-exp.
double mixture_log_likelihood(const ModelParams& p, const std::vector<int>& src,
                              const std::vector<int>& y, DropoutMode dm);

// All K per-z sequence log-probs, sharing one encoder pass.
std::vector<double> per_latent_log_probs(const ModelParams& p, const std::vector<int>& src,
                                         const std::vector<int>& y, DropoutMode dm);

// Gradients of -sequence_log_prob accumulated into `grad`; returns the loss.
double loss_and_grad(const ModelParams& p, const std::vector<int>& src, const std::vector<int>& y,
                     int z, DropoutMode dm, ModelParams& grad);

// Exact gradient structure for one example (fresh zeroed container).
ModelParams backward(const ModelParams& p, const std::vector<int>& src, const std::vector<int>& y,
                     int z, DropoutMode dm);

// Incremental decode helper for beam search: log-probs of the next token
// given decoder prefix (without BOS; BOS is implicit).
std::vector<double> next_token_log_probs(const ModelParams& p, const Matrix& enc_out,
                                         const std::vector<int>& prefix, int z);

// --- checkpoints ---------------------------------------------------------------

struct Checkpoint {
  ModelParams params;
  Vocabulary vocab;
};

void save_checkpoint(const std::string& path, const ModelParams& params, const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace retro::model
