#include <cmath>
#include <cstring>
#include <fstream>

#include "retrokit/model.hpp"

namespace retro::model {

namespace {

constexpr char kMagic[4] = {'R', 'K', 'C', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_i32(std::ostream& os, int32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_f32(std::ostream& os, float v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t get_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
int32_t get_i32(std::istream& is) {
  int32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
float get_f32(std::istream& is) {
  float v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const Vocabulary& vocab) {
  if (vocab.size() != params.cfg.vocab_size)
    throw ModelError("vocabulary size does not match the model config");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelError("cannot open checkpoint for writing: " + path);

  os.write(kMagic, 4);
  put_u32(os, kVersion);
  const ModelConfig& c = params.cfg;
  put_i32(os, c.vocab_size);
  put_i32(os, c.d_model);
  put_i32(os, c.n_heads);
  put_i32(os, c.n_enc_layers);
  put_i32(os, c.n_dec_layers);
  put_i32(os, c.d_ff);
  put_i32(os, c.max_len);
  put_i32(os, c.latent_classes);
  put_f32(os, static_cast<float>(c.dropout_p));

  put_u32(os, static_cast<uint32_t>(vocab.size()));
  for (const std::string& t : vocab.tokens()) {
    put_u32(os, static_cast<uint32_t>(t.size()));
    os.write(t.data(), static_cast<std::streamsize>(t.size()));
  }

  // tensors in declaration order: rank, shape, then f32 payload
  visit_tensors(const_cast<ModelParams&>(params), [&](const char*, Matrix& m, bool) {
    put_u32(os, 2);
    put_u32(os, static_cast<uint32_t>(m.rows));
    put_u32(os, static_cast<uint32_t>(m.cols));
    for (double v : m.d) put_f32(os, static_cast<float>(v));
  });
  if (!os) throw ModelError("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("cannot open checkpoint: " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ModelError("bad checkpoint magic in " + path);
  uint32_t version = get_u32(is);
  if (version != kVersion)
    throw ModelError("unsupported checkpoint version " + std::to_string(version));

  ModelConfig c;
  c.vocab_size = get_i32(is);
  c.d_model = get_i32(is);
  c.n_heads = get_i32(is);
  c.n_enc_layers = get_i32(is);
  c.n_dec_layers = get_i32(is);
  c.d_ff = get_i32(is);
  c.max_len = get_i32(is);
  c.latent_classes = get_i32(is);
  c.dropout_p = get_f32(is);
  c.validate();

  uint32_t vocab_n = get_u32(is);
  if (static_cast<int>(vocab_n) != c.vocab_size)
    throw ModelError("checkpoint vocabulary count disagrees with config");
  std::vector<std::string> tokens(vocab_n);
  for (uint32_t i = 0; i < vocab_n; ++i) {
    uint32_t len = get_u32(is);
    if (len > 4096) throw ModelError("implausible token length in checkpoint");
    tokens[i].resize(len);
    is.read(tokens[i].data(), len);
  }

  Checkpoint ckpt;
  ckpt.vocab = Vocabulary::from_tokens(tokens);
  ckpt.params = init_params(c, 0);  // shapes only; every tensor is overwritten

  visit_tensors(ckpt.params, [&](const char* name, Matrix& m, bool) {
    uint32_t rank = get_u32(is);
    uint32_t rows = get_u32(is);
    uint32_t cols = get_u32(is);
    if (!is || rank != 2 || static_cast<int>(rows) != m.rows || static_cast<int>(cols) != m.cols)
      throw ModelError(std::string("tensor shape mismatch for ") + name + " in " + path);
    for (double& v : m.d) {
      v = get_f32(is);
      if (!std::isfinite(v))
        throw ModelError(std::string("non-finite value in tensor ") + name + " in " + path);
    }
  });
  if (!is) throw ModelError("truncated checkpoint: " + path);
  return ckpt;
}

}  // namespace retro::model
