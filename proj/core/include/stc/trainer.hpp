#pragma once

#include <map>
#include <string>
#include <vector>

#include "stc/config.hpp"
#include "stc/metrics.hpp"
#include "stc/models.hpp"
#include "stc/synth.hpp"

namespace stc {

struct TrainConfig {
  double lr = 1e-3;
  double lr_decay = 0.8;
  int patience_checkpoints = 6;
  double label_smoothing = 0.1;
  double dropout = 0.1;
  int max_seq_len = 75;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double finetune_lr = 5e-5;
  double finetune_label_smoothing = 0.0;
  int epochs = 10;
  double grad_clip = 5.0;
  double train_gamma = 1.0;
  double aux_asr_weight = 0.0;  // auxiliary ASR CE during fine-tuning; off by default
  int grow_start_layers = 0;    // 0 disables layer-wise growth
  int grow_every_epochs = 2;

  void validate() const;
  static TrainConfig from_kv(const KvMap& kv);  // unknown keys fail fast
  KvMap to_kv() const;
};

// Adam with bias correction. Moments live here, keyed by parameter name, so
// one optimizer can be reused across steps; frozen tensors are skipped.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ComponentGraph& model, double lr);
  void step(const std::string& name, Tensor& t, double lr);  // single tensor

 private:
  struct Moments {
    std::vector<double> m, v;
    long t = 0;
  };
  double beta1_, beta2_, eps_;
  std::map<std::string, Moments> state_;
  void apply(Moments& s, Tensor& t, double lr);
};

// Multiplies lr by decay after `patience` consecutive checkpoints without a
// new best dev perplexity; the counter resets on improvement or decay.
class LrSchedule {
 public:
  LrSchedule(double lr, double decay, int patience);
  double lr() const { return lr_; }
  void observe(double dev_ppl);

 private:
  double lr_, decay_;
  int patience_, bad_ = 0;
  double best_;
};

// scale every unfrozen gradient so the global norm is at most max_norm;
// returns the pre-clip norm
double clip_gradients(ComponentGraph& model, double max_norm);

int encoder_layers(const ComponentGraph& model);
// appends one freshly initialized encoder layer (asr.encoder for asr/direct
// models, mt.encoder for mt); existing tensors are untouched
void layerwise_grow(ComponentGraph& model, int target_layers, Rng& rng);

struct TrainLogEntry {
  int epoch = 0;
  double train_loss = 0;  // per target token
  double dev_ppl = 0;
  double lr = 0;
};

struct TrainResult {
  ComponentGraph model;  // best checkpoint by dev perplexity
  std::vector<TrainLogEntry> log;
};

// unsmoothed teacher-forced dev perplexity for any model kind
ScoreReport dev_perplexity(const ComponentGraph& model, const Corpus& dev);

TrainResult pretrain(const ComponentGraph& model, const Corpus& train, const Corpus& dev,
                     const TrainConfig& cfg);
TrainResult finetune_tight(const ComponentGraph& tight, const Corpus& train, const Corpus& dev,
                           const FreezeMask& mask, const TrainConfig& cfg);

}  // namespace stc
