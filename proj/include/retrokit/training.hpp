#pragma once

#include <functional>
#include <string>
#include <vector>

#include "retrokit/model.hpp"
#include "retrokit/reaction.hpp"
#include "retrokit/rng.hpp"

namespace retro::train {

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainConfig {
  int batch_size = 32;
  double peak_lr = 1e-3;
  int warmup_steps = 400;
  double clip_norm = 1.0;
  int max_steps = 0;  // 0: bounded by epochs only
  int max_epochs = 10;
  int interval = 100;  // metrics + checkpoint cadence
  uint64_t seed = 1;
  std::string phase = "finetune";  // {pretrain, finetune}
  int selection_workers = 1;       // parallel per-z forwards; result-invariant

  void validate() const;
};

struct SeqExample {
  std::string id;
  std::vector<int> src;
  std::vector<int> tgt;  // realized decoder outputs, ending with <eos>
};

struct SeqDataset {
  model::Vocabulary vocab;
  std::vector<SeqExample> examples;

  size_t size() const { return examples.size(); }
};

// Renders reactions for the model: source = product SMILES tokens, target =
// sorted canonical reactant SMILES tokens plus <eos>. Atom maps are stripped.
SeqDataset seq_dataset_from_reactions(const std::vector<ReactionExample>& data,
                                      const model::Vocabulary* fixed_vocab = nullptr);

// adam with bias correction over one flat tensor; shared by the trainer and
// the optimizer probe tests
struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};
void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, int t, double lr,
                 const AdamHyper& hp);

// inverse-sqrt schedule with linear warmup, peaking at peak_lr
double lr_at(const TrainConfig& cfg, int step);

struct HardEMRecord {
  std::string example_id;
  int chosen_z = 1;
  std::vector<double> losses;  // per z, dropout off, total nats
};

struct HardEMTrace {
  std::vector<HardEMRecord> records;
};

struct StepResult {
  HardEMTrace trace;
  double mean_loss = 0.0;  // nats per target token, dropout-on losses
  size_t token_count = 0;
};

class Trainer {
 public:
  Trainer(model::ModelParams params, TrainConfig cfg);

  StepResult hard_em_step(const std::vector<const SeqExample*>& batch, int step_index);

  const model::ModelParams& params() const { return params_; }
  model::ModelParams take_params() { return std::move(params_); }

 private:
  model::ModelParams params_;
  model::ModelParams m_, v_;
  TrainConfig cfg_;
  int adam_t_ = 0;
};

struct MetricsRow {
  int step = 0;
  std::string phase;
  double train_loss = 0.0;
  double val_nll = 0.0;
  std::vector<long> latent_usage;  // counts per z over the interval
};

std::string format_metrics_row(const MetricsRow& row);

struct TrainResult {
  model::ModelParams params;
  std::vector<MetricsRow> metrics;
};

// Returns false to stop training early.
using TrainCallback = std::function<bool(const MetricsRow&, const model::ModelParams&)>;

// Shuffled-epoch hard-EM training. When out_dir is non-empty, metrics.tsv and
// {phase}-step{N}.ckpt / {phase}-final.ckpt are written there.
TrainResult train(model::ModelParams init, const SeqDataset& train_set, const SeqDataset& val_set,
                  const TrainConfig& cfg, const std::string& out_dir = "",
                  const TrainCallback& callback = nullptr);

// Mixture NLL in nats per target token, dropout off.
double validation_mixture_nll(const model::ModelParams& params, const SeqDataset& val);

// --- synthetic multimodal fixture ---------------------------------------------

// Mode m (1-based) applies a cyclic character shift by m-1 over the alphabet;
// every pair of modes disagrees on every position, so labels are unambiguous.
std::string synthetic_transform(const std::string& src, int mode, int alphabet = 10);

// 0 when tgt matches no mode of src.
int classify_synthetic_mode(const std::string& src, const std::string& tgt, int n_modes,
                            int alphabet = 10);

struct SyntheticData {
  SeqDataset dataset;
  std::vector<std::string> sources;
  std::vector<int> mode_labels;  // gold mode per example, 1..n_modes
};

model::Vocabulary synthetic_vocab(int alphabet = 10);

SyntheticData make_synthetic_multimodal(int n_modes, int n_examples, Rng rng, int min_len = 6,
                                        int max_len = 10, int alphabet = 10);

// Pre-training analog: every mode's target for every source.
SeqDataset synthetic_all_modes(const std::vector<std::string>& sources, int n_modes,
                               int alphabet = 10);

std::vector<int> encode_synthetic_string(const model::Vocabulary& vocab, const std::string& s,
                                         bool with_eos);

}  // namespace retro::train
