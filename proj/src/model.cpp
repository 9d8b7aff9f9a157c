#include "retrokit/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "retrokit/rng.hpp"

namespace retro::model {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct DropoutState {
  bool on = false;
  double p = 0.0;
  Rng rng{0};

  bool active() const { return on && p > 0.0; }
};

// Inverted dropout; the mask is cached for the backward pass.
void apply_dropout(Matrix& x, Matrix& mask_out, DropoutState& ds) {
  if (!ds.active()) {
    mask_out = Matrix();
    return;
  }
  mask_out = Matrix(x.rows, x.cols);
  double scale = 1.0 / (1.0 - ds.p);
  for (size_t i = 0; i < x.d.size(); ++i) {
    double keep = ds.rng.real() < ds.p ? 0.0 : 1.0;
    mask_out.d[i] = keep;
    x.d[i] *= keep * scale;
  }
}

void dropout_backward(Matrix& dx, const Matrix& mask, double p) {
  if (mask.d.empty()) return;
  double scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < dx.d.size(); ++i) dx.d[i] *= mask.d[i] * scale;
}

// --- layer norm ---------------------------------------------------------------

struct NormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};

Matrix norm_forward(const NormP& np, const Matrix& x, NormCache* c) {
  int d = x.cols;
  Matrix y(x.rows, d);
  if (c) {
    c->xhat = Matrix(x.rows, d);
    c->inv_std.assign(x.rows, 0.0);
  }
  for (int r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    double inv = 1.0 / std::sqrt(var + kNormEps);
    double* yr = y.row(r);
    for (int j = 0; j < d; ++j) {
      double xh = (xr[j] - mu) * inv;
      if (c) c->xhat.at(r, j) = xh;
      yr[j] = xh * np.gamma.at(0, j) + np.beta.at(0, j);
    }
    if (c) c->inv_std[r] = inv;
  }
  return y;
}

Matrix norm_backward(const NormP& np, const NormCache& c, const Matrix& dy, NormP& g) {
  int d = dy.cols;
  Matrix dx(dy.rows, d);
  for (int r = 0; r < dy.rows; ++r) {
    const double* dyr = dy.row(r);
    const double* xh = c.xhat.row(r);
    double m1 = 0.0, m2 = 0.0;
    for (int j = 0; j < d; ++j) {
      double dxh = dyr[j] * np.gamma.at(0, j);
      m1 += dxh;
      m2 += dxh * xh[j];
      g.gamma.at(0, j) += dyr[j] * xh[j];
      g.beta.at(0, j) += dyr[j];
    }
    m1 /= d;
    m2 /= d;
    double inv = c.inv_std[r];
    double* dxr = dx.row(r);
    for (int j = 0; j < d; ++j) {
      double dxh = dyr[j] * np.gamma.at(0, j);
      dxr[j] = inv * (dxh - m1 - xh[j] * m2);
    }
  }
  return dx;
}

// --- linear --------------------------------------------------------------------

Matrix linear_forward(const LinearP& lp, const Matrix& x) {
  Matrix y(x.rows, lp.w.cols);
  gemm_nn(x, lp.w, y);
  for (int r = 0; r < y.rows; ++r) {
    double* yr = y.row(r);
    const double* b = lp.b.row(0);
    for (int j = 0; j < y.cols; ++j) yr[j] += b[j];
  }
  return y;
}

// dx returned; dW/db accumulated into g.
Matrix linear_backward(const LinearP& lp, const Matrix& x, const Matrix& dy, LinearP& g) {
  gemm_tn(x, dy, g.w, /*accumulate=*/true);
  for (int r = 0; r < dy.rows; ++r) {
    const double* dyr = dy.row(r);
    double* gb = g.b.row(0);
    for (int j = 0; j < dy.cols; ++j) gb[j] += dyr[j];
  }
  Matrix dx(x.rows, x.cols);
  gemm_nt(dy, lp.w, dx);
  return dx;
}

// --- attention -------------------------------------------------------------------

Matrix col_block(const Matrix& m, int c0, int width) {
  Matrix out(m.rows, width);
  for (int r = 0; r < m.rows; ++r)
    std::copy(m.row(r) + c0, m.row(r) + c0 + width, out.row(r));
  return out;
}

void add_col_block(Matrix& m, int c0, const Matrix& blk) {
  for (int r = 0; r < m.rows; ++r) {
    double* dst = m.row(r) + c0;
    const double* src = blk.row(r);
    for (int j = 0; j < blk.cols; ++j) dst[j] += src[j];
  }
}

struct AttnCache {
  Matrix q_in, kv_in;
  Matrix Q, K, V;
  std::vector<Matrix> P;     // per head, post-softmax pre-dropout
  std::vector<Matrix> drop;  // per head dropout masks
  Matrix concat;
};

Matrix attn_forward(const AttnP& ap, const Matrix& q_in, const Matrix& kv_in, bool causal,
                    int n_heads, DropoutState& ds, AttnCache* c) {
  int d = ap.q.w.cols;
  int dh = d / n_heads;
  double alpha = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix Q = linear_forward(ap.q, q_in);
  Matrix K = linear_forward(ap.k, kv_in);
  Matrix V = linear_forward(ap.v, kv_in);
  Matrix concat(q_in.rows, d);

  std::vector<Matrix> Ps(n_heads), masks(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    Matrix Qh = col_block(Q, h * dh, dh);
    Matrix Kh = col_block(K, h * dh, dh);
    Matrix Vh = col_block(V, h * dh, dh);
    Matrix S(Qh.rows, Kh.rows);
    gemm_nt(Qh, Kh, S);
    scale_inplace(S, alpha);
    if (causal)
      for (int i = 0; i < S.rows; ++i)
        for (int j = i + 1; j < S.cols; ++j) S.at(i, j) = kNegInf;
    // row softmax
    for (int i = 0; i < S.rows; ++i) {
      double* sr = S.row(i);
      double mx = sr[0];
      for (int j = 1; j < S.cols; ++j) mx = std::max(mx, sr[j]);
      double sum = 0.0;
      for (int j = 0; j < S.cols; ++j) {
        sr[j] = std::exp(sr[j] - mx);
        sum += sr[j];
      }
      for (int j = 0; j < S.cols; ++j) sr[j] /= sum;
    }
    Ps[h] = S;  // post-softmax
    Matrix Pd = S;
    apply_dropout(Pd, masks[h], ds);
    Matrix Oh(Pd.rows, dh);
    gemm_nn(Pd, Vh, Oh);
    add_col_block(concat, h * dh, Oh);
  }

  Matrix out = linear_forward(ap.o, concat);
  if (c) {
    c->q_in = q_in;
    c->kv_in = kv_in;
    c->Q = std::move(Q);
    c->K = std::move(K);
    c->V = std::move(V);
    c->P = std::move(Ps);
    c->drop = std::move(masks);
    c->concat = std::move(concat);
  }
  return out;
}

// dq_in/dkv_in are accumulated (+=); they may alias storage-wise distinct mats.
void attn_backward(const AttnP& ap, const AttnCache& c, const Matrix& dout, int n_heads,
                   double p_drop, AttnP& g, Matrix& dq_in, Matrix& dkv_in) {
  int d = ap.q.w.cols;
  int dh = d / n_heads;
  double alpha = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix dconcat = linear_backward(ap.o, c.concat, dout, g.o);

  Matrix dQ(c.Q.rows, d), dK(c.K.rows, d), dV(c.V.rows, d);
  for (int h = 0; h < n_heads; ++h) {
    Matrix dOh = col_block(dconcat, h * dh, dh);
    Matrix Vh = col_block(c.V, h * dh, dh);
    Matrix Qh = col_block(c.Q, h * dh, dh);
    Matrix Kh = col_block(c.K, h * dh, dh);

    // recreate the dropped attention matrix used in the forward pass
    Matrix Pd = c.P[h];
    if (!c.drop[h].d.empty()) {
      double scale = 1.0 / (1.0 - p_drop);
      for (size_t i = 0; i < Pd.d.size(); ++i) Pd.d[i] *= c.drop[h].d[i] * scale;
    }

    Matrix dPd(Pd.rows, Pd.cols);
    gemm_nt(dOh, Vh, dPd);
    Matrix dVh(Vh.rows, dh);
    gemm_tn(Pd, dOh, dVh);

    dropout_backward(dPd, c.drop[h], p_drop);

    // softmax jacobian, rowwise
    Matrix dS(Pd.rows, Pd.cols);
    for (int i = 0; i < dS.rows; ++i) {
      const double* p = c.P[h].row(i);
      const double* dp = dPd.row(i);
      double dot = 0.0;
      for (int j = 0; j < dS.cols; ++j) dot += dp[j] * p[j];
      double* ds_r = dS.row(i);
      for (int j = 0; j < dS.cols; ++j) ds_r[j] = p[j] * (dp[j] - dot);
    }
    scale_inplace(dS, alpha);

    Matrix dQh(Qh.rows, dh), dKh(Kh.rows, dh);
    gemm_nn(dS, Kh, dQh);
    gemm_tn(dS, Qh, dKh);

    add_col_block(dQ, h * dh, dQh);
    add_col_block(dK, h * dh, dKh);
    add_col_block(dV, h * dh, dVh);
  }

  add_inplace(dq_in, linear_backward(ap.q, c.q_in, dQ, g.q));
  add_inplace(dkv_in, linear_backward(ap.k, c.kv_in, dK, g.k));
  add_inplace(dkv_in, linear_backward(ap.v, c.kv_in, dV, g.v));
}

// --- feed forward -----------------------------------------------------------------

struct FfnCache {
  Matrix in, h1, act_drop, drop_mask;
};

Matrix ffn_forward(const LinearP& ff1, const LinearP& ff2, const Matrix& x, DropoutState& ds,
                   FfnCache* c) {
  Matrix h1 = linear_forward(ff1, x);
  Matrix a = h1;
  for (double& v : a.d) v = v > 0.0 ? v : 0.0;
  Matrix mask;
  apply_dropout(a, mask, ds);
  Matrix y = linear_forward(ff2, a);
  if (c) {
    c->in = x;
    c->h1 = std::move(h1);
    c->act_drop = std::move(a);
    c->drop_mask = std::move(mask);
  }
  return y;
}

Matrix ffn_backward(const LinearP& ff1, const LinearP& ff2, const FfnCache& c, const Matrix& dy,
                    double p_drop, LinearP& g1, LinearP& g2) {
  Matrix da = linear_backward(ff2, c.act_drop, dy, g2);
  dropout_backward(da, c.drop_mask, p_drop);
  for (size_t i = 0; i < da.d.size(); ++i)
    if (c.h1.d[i] <= 0.0) da.d[i] = 0.0;
  return linear_backward(ff1, c.in, da, g1);
}

// --- embeddings --------------------------------------------------------------------

void check_ids(const ModelConfig& cfg, const std::vector<int>& ids, const char* what) {
  if (static_cast<int>(ids.size()) > cfg.max_len)
    throw ModelError(std::string("SequenceTooLong: ") + what + " length " +
                     std::to_string(ids.size()) + " exceeds max_len " +
                     std::to_string(cfg.max_len));
  for (int id : ids)
    if (id < 0 || id >= cfg.vocab_size)
      throw ModelError(std::string("TokenOutOfRange: ") + what + " id " + std::to_string(id));
}

Matrix embed(const ModelParams& p, const std::vector<int>& ids, const double* extra_row) {
  int d = p.cfg.d_model;
  double s = std::sqrt(static_cast<double>(d));
  Matrix e(static_cast<int>(ids.size()), d);
  for (size_t t = 0; t < ids.size(); ++t) {
    const double* tok = p.token_embedding.row(ids[t]);
    const double* pos = p.positional.row(static_cast<int>(t));
    double* er = e.row(static_cast<int>(t));
    for (int j = 0; j < d; ++j) er[j] = tok[j] * s + pos[j] + (extra_row ? extra_row[j] : 0.0);
  }
  return e;
}

// --- encoder / decoder stacks --------------------------------------------------------

struct EncLayerCache {
  NormCache n1;
  AttnCache attn;
  Matrix x_in, x_mid;
  NormCache n2;
  FfnCache ffn;
};

struct EncodeCache {
  Matrix emb_drop_mask;
  std::vector<EncLayerCache> layers;
  NormCache final_norm;
  Matrix pre_final;
};

Matrix encode_impl(const ModelParams& p, const std::vector<int>& src, DropoutState& ds,
                   EncodeCache* c) {
  check_ids(p.cfg, src, "source");
  if (src.empty()) throw ModelError("empty source sequence");
  Matrix x = embed(p, src, nullptr);
  Matrix mask;
  apply_dropout(x, mask, ds);
  if (c) {
    c->emb_drop_mask = std::move(mask);
    c->layers.resize(p.enc.size());
  }
  for (size_t l = 0; l < p.enc.size(); ++l) {
    const EncLayerP& lp = p.enc[l];
    EncLayerCache* lc = c ? &c->layers[l] : nullptr;
    if (lc) lc->x_in = x;
    Matrix a = norm_forward(lp.norm1, x, lc ? &lc->n1 : nullptr);
    Matrix sa = attn_forward(lp.self_attn, a, a, false, p.cfg.n_heads, ds, lc ? &lc->attn : nullptr);
    add_inplace(x, sa);
    if (lc) lc->x_mid = x;
    Matrix b = norm_forward(lp.norm2, x, lc ? &lc->n2 : nullptr);
    Matrix ff = ffn_forward(lp.ff1, lp.ff2, b, ds, lc ? &lc->ffn : nullptr);
    add_inplace(x, ff);
  }
  if (c) c->pre_final = x;
  return norm_forward(p.enc_final, x, c ? &c->final_norm : nullptr);
}

void encode_backward_impl(const ModelParams& p, const std::vector<int>& src,
                          const EncodeCache& c, Matrix dout, ModelParams& g) {
  Matrix dx = norm_backward(p.enc_final, c.final_norm, dout, g.enc_final);
  for (int l = static_cast<int>(p.enc.size()) - 1; l >= 0; --l) {
    const EncLayerP& lp = p.enc[l];
    const EncLayerCache& lc = c.layers[l];
    EncLayerP& gl = g.enc[l];
    // x_out = x_mid + ffn(norm2(x_mid))
    Matrix db = ffn_backward(lp.ff1, lp.ff2, lc.ffn, dx, p.cfg.dropout_p, gl.ff1, gl.ff2);
    add_inplace(dx, norm_backward(lp.norm2, lc.n2, db, gl.norm2));
    // x_mid = x_in + attn(norm1(x_in))
    Matrix da(dx.rows, dx.cols);
    attn_backward(lp.self_attn, lc.attn, dx, p.cfg.n_heads, p.cfg.dropout_p, gl.self_attn, da, da);
    add_inplace(dx, norm_backward(lp.norm1, lc.n1, da, gl.norm1));
  }
  dropout_backward(dx, c.emb_drop_mask, p.cfg.dropout_p);
  double s = std::sqrt(static_cast<double>(p.cfg.d_model));
  for (size_t t = 0; t < src.size(); ++t) {
    double* grow = g.token_embedding.row(src[t]);
    const double* dr = dx.row(static_cast<int>(t));
    for (int j = 0; j < p.cfg.d_model; ++j) grow[j] += dr[j] * s;
  }
}

struct DecLayerCache {
  NormCache n1;
  AttnCache self_attn;
  Matrix x_in, x_mid1, x_mid2;
  NormCache n2;
  AttnCache cross;
  NormCache n3;
  FfnCache ffn;
};

struct DecodeCache {
  Matrix emb_drop_mask;
  std::vector<DecLayerCache> layers;
  NormCache final_norm;
  Matrix probs;  // softmax rows, for the loss gradient
};

Matrix decode_impl(const ModelParams& p, const Matrix& enc_out, const std::vector<int>& dec_in,
                   int z, DropoutState& ds, DecodeCache* c) {
  check_ids(p.cfg, dec_in, "target");
  if (z < 1 || z > p.cfg.latent_classes)
    throw ModelError("latent class " + std::to_string(z) + " out of range 1.." +
                     std::to_string(p.cfg.latent_classes));
  Matrix x = embed(p, dec_in, p.latent_embedding.row(z - 1));
  Matrix mask;
  apply_dropout(x, mask, ds);
  if (c) {
    c->emb_drop_mask = std::move(mask);
    c->layers.resize(p.dec.size());
  }
  for (size_t l = 0; l < p.dec.size(); ++l) {
    const DecLayerP& lp = p.dec[l];
    DecLayerCache* lc = c ? &c->layers[l] : nullptr;
    if (lc) lc->x_in = x;
    Matrix a = norm_forward(lp.norm1, x, lc ? &lc->n1 : nullptr);
    Matrix sa =
        attn_forward(lp.self_attn, a, a, true, p.cfg.n_heads, ds, lc ? &lc->self_attn : nullptr);
    add_inplace(x, sa);
    if (lc) lc->x_mid1 = x;
    Matrix b = norm_forward(lp.norm2, x, lc ? &lc->n2 : nullptr);
    Matrix ca = attn_forward(lp.cross_attn, b, enc_out, false, p.cfg.n_heads, ds,
                             lc ? &lc->cross : nullptr);
    add_inplace(x, ca);
    if (lc) lc->x_mid2 = x;
    Matrix cnorm = norm_forward(lp.norm3, x, lc ? &lc->n3 : nullptr);
    Matrix ff = ffn_forward(lp.ff1, lp.ff2, cnorm, ds, lc ? &lc->ffn : nullptr);
    add_inplace(x, ff);
  }
  Matrix h = norm_forward(p.dec_final, x, c ? &c->final_norm : nullptr);
  Matrix logits = linear_forward(p.out_proj, h);

  if (c) c->probs = Matrix(logits.rows, logits.cols);
  // rowwise log-softmax
  for (int r = 0; r < logits.rows; ++r) {
    double* lr = logits.row(r);
    double mx = lr[0];
    for (int j = 1; j < logits.cols; ++j) mx = std::max(mx, lr[j]);
    double sum = 0.0;
    for (int j = 0; j < logits.cols; ++j) sum += std::exp(lr[j] - mx);
    double lse = mx + std::log(sum);
    for (int j = 0; j < logits.cols; ++j) {
      lr[j] -= lse;
      if (c) c->probs.at(r, j) = std::exp(lr[j]);
    }
  }
  return logits;  // now log-probs
}

// needs the final-norm output for out_proj's weight gradient; recomputed from cache
void decode_backward_impl(const ModelParams& p, const std::vector<int>& dec_in, int z,
                          const DecodeCache& c, const Matrix& dlogits, ModelParams& g,
                          Matrix& denc_out) {
  // h = gamma*xhat+beta is cheap to rebuild from the cached xhat
  Matrix h(c.final_norm.xhat.rows, c.final_norm.xhat.cols);
  for (int r = 0; r < h.rows; ++r)
    for (int j = 0; j < h.cols; ++j)
      h.at(r, j) = c.final_norm.xhat.at(r, j) * p.dec_final.gamma.at(0, j) +
                   p.dec_final.beta.at(0, j);

  Matrix dh = linear_backward(p.out_proj, h, dlogits, g.out_proj);
  Matrix dx = norm_backward(p.dec_final, c.final_norm, dh, g.dec_final);

  for (int l = static_cast<int>(p.dec.size()) - 1; l >= 0; --l) {
    const DecLayerP& lp = p.dec[l];
    const DecLayerCache& lc = c.layers[l];
    DecLayerP& gl = g.dec[l];

    Matrix dc = ffn_backward(lp.ff1, lp.ff2, lc.ffn, dx, p.cfg.dropout_p, gl.ff1, gl.ff2);
    add_inplace(dx, norm_backward(lp.norm3, lc.n3, dc, gl.norm3));

    Matrix db(dx.rows, dx.cols);
    attn_backward(lp.cross_attn, lc.cross, dx, p.cfg.n_heads, p.cfg.dropout_p, gl.cross_attn, db,
                  denc_out);
    add_inplace(dx, norm_backward(lp.norm2, lc.n2, db, gl.norm2));

    Matrix da(dx.rows, dx.cols);
    attn_backward(lp.self_attn, lc.self_attn, dx, p.cfg.n_heads, p.cfg.dropout_p, gl.self_attn,
                  da, da);
    add_inplace(dx, norm_backward(lp.norm1, lc.n1, da, gl.norm1));
  }

  dropout_backward(dx, c.emb_drop_mask, p.cfg.dropout_p);
  double s = std::sqrt(static_cast<double>(p.cfg.d_model));
  double* lat = g.latent_embedding.row(z - 1);
  for (size_t t = 0; t < dec_in.size(); ++t) {
    double* grow = g.token_embedding.row(dec_in[t]);
    const double* dr = dx.row(static_cast<int>(t));
    for (int j = 0; j < p.cfg.d_model; ++j) {
      grow[j] += dr[j] * s;
      lat[j] += dr[j];
    }
  }
}

std::vector<int> make_dec_in(const std::vector<int>& y) {
  std::vector<int> dec_in;
  dec_in.reserve(y.size() + 1);
  dec_in.push_back(Vocabulary::bos_id);
  for (size_t i = 0; i + 1 < y.size(); ++i) dec_in.push_back(y[i]);
  if (y.empty()) dec_in.resize(1);
  return dec_in;
}

}  // namespace

// --- public API ---------------------------------------------------------------------

void ModelConfig::validate() const {
  if (vocab_size < 3) throw ModelError("vocab_size must cover the reserved special tokens");
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0)
    throw ModelError("d_model must be a positive multiple of n_heads");
  if (n_enc_layers < 1 || n_dec_layers < 1) throw ModelError("need at least one layer per stack");
  if (d_ff <= 0 || max_len <= 0) throw ModelError("d_ff and max_len must be positive");
  if (latent_classes < 1) throw ModelError("latent_classes must be >= 1");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw ModelError("dropout_p must be in [0, 1)");
}

namespace {

Matrix glorot(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& v : m.d) v = rng.uniform(-limit, limit);
  return m;
}

LinearP init_linear(Rng& rng, int in, int out) {
  LinearP lp;
  lp.w = glorot(rng, in, out);
  lp.b = Matrix(1, out);
  return lp;
}

NormP init_norm(int d) {
  NormP np;
  np.gamma = Matrix(1, d);
  np.gamma.fill(1.0);
  np.beta = Matrix(1, d);
  return np;
}

AttnP init_attn(Rng& rng, int d) {
  AttnP ap;
  ap.q = init_linear(rng, d, d);
  ap.k = init_linear(rng, d, d);
  ap.v = init_linear(rng, d, d);
  ap.o = init_linear(rng, d, d);
  return ap;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams p;
  p.cfg = cfg;
  int d = cfg.d_model;
  p.token_embedding = glorot(rng, cfg.vocab_size, d);
  p.latent_embedding = glorot(rng, cfg.latent_classes, d);

  p.positional = Matrix(cfg.max_len, d);
  for (int t = 0; t < cfg.max_len; ++t)
    for (int j = 0; j < d; ++j) {
      double angle = t / std::pow(10000.0, 2.0 * (j / 2) / static_cast<double>(d));
      p.positional.at(t, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }

  for (int l = 0; l < cfg.n_enc_layers; ++l) {
    EncLayerP lp;
    lp.norm1 = init_norm(d);
    lp.self_attn = init_attn(rng, d);
    lp.norm2 = init_norm(d);
    lp.ff1 = init_linear(rng, d, cfg.d_ff);
    lp.ff2 = init_linear(rng, cfg.d_ff, d);
    p.enc.push_back(std::move(lp));
  }
  p.enc_final = init_norm(d);
  for (int l = 0; l < cfg.n_dec_layers; ++l) {
    DecLayerP lp;
    lp.norm1 = init_norm(d);
    lp.self_attn = init_attn(rng, d);
    lp.norm2 = init_norm(d);
    lp.cross_attn = init_attn(rng, d);
    lp.norm3 = init_norm(d);
    lp.ff1 = init_linear(rng, d, cfg.d_ff);
    lp.ff2 = init_linear(rng, cfg.d_ff, d);
    p.dec.push_back(std::move(lp));
  }
  p.dec_final = init_norm(d);
  p.out_proj = init_linear(rng, d, cfg.vocab_size);
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  visit_tensors(z, [](const char*, Matrix& m, bool) { m.zero(); });
  return z;
}

size_t param_count(const ModelConfig& cfg) {
  size_t d = cfg.d_model, V = cfg.vocab_size, F = cfg.d_ff, K = cfg.latent_classes;
  size_t attn = 4 * (d * d + d);
  size_t norm = 2 * d;
  size_t ffn = d * F + F + F * d + d;
  size_t enc_layer = norm + attn + norm + ffn;
  size_t dec_layer = norm + attn + norm + attn + norm + ffn;
  return V * d + K * d + cfg.n_enc_layers * enc_layer + norm + cfg.n_dec_layers * dec_layer +
         norm + d * V + V;
}

Matrix encode(const ModelParams& p, const std::vector<int>& src, DropoutMode dm) {
  DropoutState ds{dm.on, p.cfg.dropout_p, Rng(dm.seed)};
  return encode_impl(p, src, ds, nullptr);
}

Matrix forward(const ModelParams& p, const std::vector<int>& src,
               const std::vector<int>& y_prefix, int z, DropoutMode dm) {
  DropoutState ds{dm.on, p.cfg.dropout_p, Rng(dm.seed)};
  Matrix enc_out = encode_impl(p, src, ds, nullptr);
  std::vector<int> dec_in;
  dec_in.push_back(Vocabulary::bos_id);
  dec_in.insert(dec_in.end(), y_prefix.begin(), y_prefix.end());
  return decode_impl(p, enc_out, dec_in, z, ds, nullptr);
}

double sequence_log_prob(const ModelParams& p, const std::vector<int>& src,
                         const std::vector<int>& y, int z, DropoutMode dm) {
  DropoutState ds{dm.on, p.cfg.dropout_p, Rng(dm.seed)};
  Matrix enc_out = encode_impl(p, src, ds, nullptr);
  std::vector<int> dec_in = make_dec_in(y);
  Matrix lp = decode_impl(p, enc_out, dec_in, z, ds, nullptr);
  double total = 0.0;
  for (size_t t = 0; t < y.size(); ++t) total += lp.at(static_cast<int>(t), y[t]);
  return total;
}

double mixture_log_likelihood(const ModelParams& p, const std::vector<int>& src,
                              const std::vector<int>& y, DropoutMode dm) {
  int K = p.cfg.latent_classes;
  std::vector<double> lps(K);
  for (int z = 1; z <= K; ++z) lps[z - 1] = sequence_log_prob(p, src, y, z, dm);
  if (K == 1) return lps[0];  // exact single-component reduction
  return log_sum_exp(lps) - std::log(static_cast<double>(K));
}

std::vector<double> per_latent_log_probs(const ModelParams& p, const std::vector<int>& src,
                                         const std::vector<int>& y, DropoutMode dm) {
  DropoutState ds{dm.on, p.cfg.dropout_p, Rng(dm.seed)};
  Matrix enc_out = encode_impl(p, src, ds, nullptr);
  std::vector<int> dec_in = make_dec_in(y);
  std::vector<double> out(p.cfg.latent_classes);
  for (int z = 1; z <= p.cfg.latent_classes; ++z) {
    DropoutState dz{dm.on, p.cfg.dropout_p, Rng(dm.seed ^ (0x9e37u * z))};
    Matrix lp = decode_impl(p, enc_out, dec_in, z, dz, nullptr);
    double total = 0.0;
    for (size_t t = 0; t < y.size(); ++t) total += lp.at(static_cast<int>(t), y[t]);
    out[z - 1] = total;
  }
  return out;
}

double loss_and_grad(const ModelParams& p, const std::vector<int>& src, const std::vector<int>& y,
                     int z, DropoutMode dm, ModelParams& grad) {
  DropoutState ds{dm.on, p.cfg.dropout_p, Rng(dm.seed)};
  EncodeCache ec;
  Matrix enc_out = encode_impl(p, src, ds, &ec);
  std::vector<int> dec_in = make_dec_in(y);
  DecodeCache dc;
  Matrix lp = decode_impl(p, enc_out, dec_in, z, ds, &dc);

  double loss = 0.0;
  for (size_t t = 0; t < y.size(); ++t) loss -= lp.at(static_cast<int>(t), y[t]);

  // d(-sum log p)/dlogits = softmax - onehot on realized rows
  Matrix dlogits = dc.probs;
  for (int r = static_cast<int>(y.size()); r < dlogits.rows; ++r)
    for (int j = 0; j < dlogits.cols; ++j) dlogits.at(r, j) = 0.0;
  for (size_t t = 0; t < y.size(); ++t) dlogits.at(static_cast<int>(t), y[t]) -= 1.0;

  Matrix denc(enc_out.rows, enc_out.cols);
  decode_backward_impl(p, dec_in, z, dc, dlogits, grad, denc);
  encode_backward_impl(p, src, ec, std::move(denc), grad);
  return loss;
}

ModelParams backward(const ModelParams& p, const std::vector<int>& src, const std::vector<int>& y,
                     int z, DropoutMode dm) {
  ModelParams grad = zeros_like(p);
  loss_and_grad(p, src, y, z, dm, grad);
  return grad;
}

std::vector<double> next_token_log_probs(const ModelParams& p, const Matrix& enc_out,
                                         const std::vector<int>& prefix, int z) {
  std::vector<int> dec_in;
  dec_in.push_back(Vocabulary::bos_id);
  dec_in.insert(dec_in.end(), prefix.begin(), prefix.end());
  DropoutState ds;
  Matrix lp = decode_impl(p, enc_out, dec_in, z, ds, nullptr);
  const double* last = lp.row(lp.rows - 1);
  return std::vector<double>(last, last + lp.cols);
}

}  // namespace retro::model
