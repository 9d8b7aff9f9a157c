#include "retrokit/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "retrokit/chem.hpp"

namespace retro::train {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
  if (peak_lr <= 0) throw std::invalid_argument("peak_lr must be positive");
  if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be positive");
  if (clip_norm <= 0) throw std::invalid_argument("clip_norm must be positive");
  if (max_steps < 0 || max_epochs < 1) throw std::invalid_argument("bad step/epoch limits");
  if (max_steps > 0 && warmup_steps > max_steps)
    throw std::invalid_argument("warmup exceeds max_steps");
  if (interval < 1) throw std::invalid_argument("interval must be positive");
  if (phase != "pretrain" && phase != "finetune")
    throw std::invalid_argument("phase must be pretrain or finetune");
}

SeqDataset seq_dataset_from_reactions(const std::vector<ReactionExample>& data,
                                      const model::Vocabulary* fixed_vocab) {
  std::vector<std::vector<std::string>> src_tokens(data.size()), tgt_tokens(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    src_tokens[i] = chem::tokenize(product_string(data[i]));
    tgt_tokens[i] = chem::tokenize(reactants_string(data[i]));
  }
  SeqDataset out;
  if (fixed_vocab) {
    out.vocab = *fixed_vocab;
  } else {
    std::vector<std::vector<std::string>> all = src_tokens;
    all.insert(all.end(), tgt_tokens.begin(), tgt_tokens.end());
    out.vocab = model::Vocabulary::build(all);
  }
  for (size_t i = 0; i < data.size(); ++i) {
    SeqExample ex;
    ex.id = data[i].id.empty() ? "ex" + std::to_string(i) : data[i].id;
    ex.src = out.vocab.encode(src_tokens[i]);
    ex.tgt = out.vocab.encode(tgt_tokens[i]);
    ex.tgt.push_back(model::Vocabulary::eos_id);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, int t, double lr,
                 const AdamHyper& hp) {
  double bc1 = 1.0 - std::pow(hp.beta1, t);
  double bc2 = 1.0 - std::pow(hp.beta2, t);
  for (size_t i = 0; i < param.size(); ++i) {
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * grad[i];
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + hp.eps);
  }
}

double lr_at(const TrainConfig& cfg, int step) {
  double s = std::max(1, step);
  double w = cfg.warmup_steps;
  return cfg.peak_lr * std::min(s / w, std::sqrt(w / s));
}

Trainer::Trainer(model::ModelParams params, TrainConfig cfg)
    : params_(std::move(params)), cfg_(std::move(cfg)) {
  cfg_.validate();
  m_ = model::zeros_like(params_);
  v_ = model::zeros_like(params_);
}

StepResult Trainer::hard_em_step(const std::vector<const SeqExample*>& batch, int step_index) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  int K = params_.cfg.latent_classes;

  // (a) per-z losses with dropout off; parallel-safe, result order fixed
  std::vector<std::vector<double>> losses(batch.size());
  auto select = [&](size_t i) {
    std::vector<double> lps =
        model::per_latent_log_probs(params_, batch[i]->src, batch[i]->tgt, model::DropoutMode::off());
    std::vector<double> ls(K);
    for (int z = 0; z < K; ++z) ls[z] = -lps[z];
    losses[i] = std::move(ls);
  };
  if (cfg_.selection_workers <= 1 || batch.size() == 1) {
    for (size_t i = 0; i < batch.size(); ++i) select(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    int n = std::min<int>(cfg_.selection_workers, static_cast<int>(batch.size()));
    for (int w = 0; w < n; ++w)
      pool.emplace_back([&]() {
        while (true) {
          size_t i = next.fetch_add(1);
          if (i >= batch.size()) break;
          select(i);
        }
      });
    for (auto& th : pool) th.join();
  }

  StepResult result;
  std::vector<int> chosen(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    for (double l : losses[i])
      if (!std::isfinite(l))
        throw NumericError("NonFiniteLoss: selection loss for example " + batch[i]->id);
    // (b) argmin over z, first minimum wins
    int best = 0;
    for (int z = 1; z < K; ++z)
      if (losses[i][z] < losses[i][best]) best = z;
    chosen[i] = best + 1;
    result.trace.records.push_back({batch[i]->id, best + 1, losses[i]});
  }

  // (c) dropout-on gradients for the chosen component, example order fixed
  model::ModelParams grad = model::zeros_like(params_);
  double loss_sum = 0.0;
  size_t tokens = 0;
  for (size_t i = 0; i < batch.size(); ++i) {
    uint64_t salt = fnv1a64(&step_index, sizeof(step_index), cfg_.seed);
    salt = fnv1a64(&i, sizeof(i), salt);
    double loss = model::loss_and_grad(params_, batch[i]->src, batch[i]->tgt, chosen[i],
                                       model::DropoutMode::with_seed(salt), grad);
    if (!std::isfinite(loss))
      throw NumericError("NonFiniteLoss: gradient loss for example " + batch[i]->id);
    loss_sum += loss;
    tokens += batch[i]->tgt.size();
  }

  // (d) clip by global norm, one optimizer update
  double scale = 1.0 / static_cast<double>(batch.size());
  double sq = 0.0;
  model::visit_tensors(grad, [&](const char*, Matrix& g, bool trainable) {
    if (!trainable) return;
    for (double& x : g.d) {
      x *= scale;
      sq += x * x;
    }
  });
  double norm = std::sqrt(sq);
  if (norm > cfg_.clip_norm) {
    double s = cfg_.clip_norm / norm;
    model::visit_tensors(grad, [&](const char*, Matrix& g, bool trainable) {
      if (trainable) scale_inplace(g, s);
    });
  }

  ++adam_t_;
  double lr = lr_at(cfg_, step_index);
  AdamHyper hp;
  std::vector<Matrix*> gm;
  model::visit_tensors(grad, [&](const char*, Matrix& g, bool) { gm.push_back(&g); });
  std::vector<Matrix*> mm, vm;
  model::visit_tensors(m_, [&](const char*, Matrix& x, bool) { mm.push_back(&x); });
  model::visit_tensors(v_, [&](const char*, Matrix& x, bool) { vm.push_back(&x); });
  size_t ti = 0;
  model::visit_tensors(params_, [&](const char*, Matrix& pmat, bool trainable) {
    if (trainable) adam_update(pmat.d, gm[ti]->d, mm[ti]->d, vm[ti]->d, adam_t_, lr, hp);
    ++ti;
  });

  result.mean_loss = loss_sum / static_cast<double>(std::max<size_t>(1, tokens));
  result.token_count = tokens;
  return result;
}

double validation_mixture_nll(const model::ModelParams& params, const SeqDataset& val) {
  double nll = 0.0;
  size_t tokens = 0;
  for (const SeqExample& ex : val.examples) {
    nll -= model::mixture_log_likelihood(params, ex.src, ex.tgt, model::DropoutMode::off());
    tokens += ex.tgt.size();
  }
  return nll / static_cast<double>(std::max<size_t>(1, tokens));
}

std::string format_metrics_row(const MetricsRow& row) {
  std::ostringstream os;
  os << row.step << '\t' << row.phase << '\t' << row.train_loss << '\t' << row.val_nll << '\t';
  for (size_t i = 0; i < row.latent_usage.size(); ++i) {
    if (i) os << ',';
    os << row.latent_usage[i];
  }
  return os.str();
}

TrainResult train(model::ModelParams init, const SeqDataset& train_set, const SeqDataset& val_set,
                  const TrainConfig& cfg, const std::string& out_dir,
                  const TrainCallback& callback) {
  cfg.validate();
  if (train_set.vocab.size() != init.cfg.vocab_size)
    throw model::VocabMismatch("dataset vocabulary does not match the model");
  for (const SeqExample& ex : train_set.examples)
    for (int id : ex.src)
      if (id >= init.cfg.vocab_size) throw model::VocabMismatch("token id beyond model vocab");

  Trainer trainer(std::move(init), cfg);
  TrainResult result;

  std::ofstream metrics_out;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics_out.open(out_dir + "/metrics.tsv", std::ios::app);
  }

  int K = trainer.params().cfg.latent_classes;
  std::vector<long> usage(K, 0);
  double interval_loss = 0.0;
  size_t interval_tokens = 0;
  int step = 0;
  bool stop = false;

  auto flush_interval = [&]() -> bool {
    MetricsRow row;
    row.step = step;
    row.phase = cfg.phase;
    row.train_loss =
        interval_tokens ? interval_loss / static_cast<double>(interval_tokens) : 0.0;
    row.val_nll = validation_mixture_nll(trainer.params(), val_set);
    row.latent_usage = usage;
    result.metrics.push_back(row);
    if (metrics_out) metrics_out << format_metrics_row(row) << "\n" << std::flush;
    if (!out_dir.empty()) {
      std::string path = out_dir + "/" + cfg.phase + "-step" + std::to_string(step) + ".ckpt";
      model::save_checkpoint(path, trainer.params(), train_set.vocab);
    }
    std::fill(usage.begin(), usage.end(), 0);
    interval_loss = 0.0;
    interval_tokens = 0;
    if (callback && !callback(row, trainer.params())) return false;
    return true;
  };

  for (int epoch = 0; epoch < cfg.max_epochs && !stop; ++epoch) {
    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng erng(cfg.seed ^ (0xe9c7u + 31ull * static_cast<uint64_t>(epoch)));
    erng.shuffle(order);

    for (size_t start = 0; start < order.size() && !stop; start += cfg.batch_size) {
      std::vector<const SeqExample*> batch;
      for (size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
        batch.push_back(&train_set.examples[order[i]]);
      ++step;
      StepResult sr = trainer.hard_em_step(batch, step);
      for (const HardEMRecord& rec : sr.trace.records) usage[rec.chosen_z - 1] += 1;
      interval_loss += sr.mean_loss * static_cast<double>(sr.token_count);
      interval_tokens += sr.token_count;
      if (step % cfg.interval == 0 && !flush_interval()) stop = true;
      if (cfg.max_steps > 0 && step >= cfg.max_steps) stop = true;
    }
  }
  if (interval_tokens > 0 || result.metrics.empty()) flush_interval();

  result.params = trainer.take_params();
  if (!out_dir.empty())
    model::save_checkpoint(out_dir + "/" + cfg.phase + "-final.ckpt", result.params,
                           train_set.vocab);
  return result;
}

}  // namespace retro::train
