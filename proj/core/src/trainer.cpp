#include "stc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stc {

// ---------------------------------------------------------------------------
// config

void TrainConfig::validate() const {
  if (!(lr > 0)) throw std::invalid_argument("config: lr must be > 0");
  if (lr_decay < 0.8 || lr_decay > 0.9)
    throw std::invalid_argument("config: lr_decay must be in [0.8, 0.9]");
  if (patience_checkpoints < 1) throw std::invalid_argument("config: patience must be >= 1");
  if (label_smoothing < 0 || label_smoothing >= 1)
    throw std::invalid_argument("config: label_smoothing must be in [0, 1)");
  if (dropout < 0 || dropout >= 1)
    throw std::invalid_argument("config: dropout must be in [0, 1)");
  if (max_seq_len < 1) throw std::invalid_argument("config: max_seq_len must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (finetune_lr < 1e-5 || finetune_lr > 8e-5)
    throw std::invalid_argument("config: finetune_lr must be in [1e-5, 8e-5]");
  if (finetune_label_smoothing != 0)
    throw std::invalid_argument("config: finetune_label_smoothing must be 0");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (grad_clip <= 0) throw std::invalid_argument("config: grad_clip must be > 0");
  if (train_gamma < 0) throw std::invalid_argument("config: train_gamma must be >= 0");
  if (aux_asr_weight < 0) throw std::invalid_argument("config: aux_asr_weight must be >= 0");
  if (grow_start_layers < 0) throw std::invalid_argument("config: grow_start_layers must be >= 0");
  if (grow_every_epochs < 1) throw std::invalid_argument("config: grow_every_epochs must be >= 1");
}

TrainConfig TrainConfig::from_kv(const KvMap& kv) {
  TrainConfig c;
  for (const auto& [key, value] : kv) {
    std::istringstream is(value);
    bool ok = true;
    if (key == "lr") ok = static_cast<bool>(is >> c.lr);
    else if (key == "lr_decay") ok = static_cast<bool>(is >> c.lr_decay);
    else if (key == "patience_checkpoints") ok = static_cast<bool>(is >> c.patience_checkpoints);
    else if (key == "label_smoothing") ok = static_cast<bool>(is >> c.label_smoothing);
    else if (key == "dropout") ok = static_cast<bool>(is >> c.dropout);
    else if (key == "max_seq_len") ok = static_cast<bool>(is >> c.max_seq_len);
    else if (key == "batch_size") ok = static_cast<bool>(is >> c.batch_size);
    else if (key == "seed") ok = static_cast<bool>(is >> c.seed);
    else if (key == "finetune_lr") ok = static_cast<bool>(is >> c.finetune_lr);
    else if (key == "finetune_label_smoothing") ok = static_cast<bool>(is >> c.finetune_label_smoothing);
    else if (key == "epochs") ok = static_cast<bool>(is >> c.epochs);
    else if (key == "grad_clip") ok = static_cast<bool>(is >> c.grad_clip);
    else if (key == "train_gamma") ok = static_cast<bool>(is >> c.train_gamma);
    else if (key == "aux_asr_weight") ok = static_cast<bool>(is >> c.aux_asr_weight);
    else if (key == "grow_start_layers") ok = static_cast<bool>(is >> c.grow_start_layers);
    else if (key == "grow_every_epochs") ok = static_cast<bool>(is >> c.grow_every_epochs);
    else throw std::invalid_argument("config: unknown key: " + key);
    if (!ok) throw std::invalid_argument("config: invalid value for " + key + ": " + value);
  }
  c.validate();
  return c;
}

KvMap TrainConfig::to_kv() const {
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  return {
      {"lr", num(lr)},
      {"lr_decay", num(lr_decay)},
      {"patience_checkpoints", std::to_string(patience_checkpoints)},
      {"label_smoothing", num(label_smoothing)},
      {"dropout", num(dropout)},
      {"max_seq_len", std::to_string(max_seq_len)},
      {"batch_size", std::to_string(batch_size)},
      {"seed", std::to_string(seed)},
      {"finetune_lr", num(finetune_lr)},
      {"finetune_label_smoothing", num(finetune_label_smoothing)},
      {"epochs", std::to_string(epochs)},
      {"grad_clip", num(grad_clip)},
      {"train_gamma", num(train_gamma)},
      {"aux_asr_weight", num(aux_asr_weight)},
      {"grow_start_layers", std::to_string(grow_start_layers)},
      {"grow_every_epochs", std::to_string(grow_every_epochs)},
  };
}

// ---------------------------------------------------------------------------
// optimizer and schedule

Adam::Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::apply(Moments& s, Tensor& t, double lr) {
  const std::size_t n = t.numel();
  if (s.m.empty()) {
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
  }
  if (s.m.size() != n) throw std::invalid_argument("adam: moment shape mismatch");
  ++s.t;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
  auto pv = t.values();
  auto pg = t.has_grad() ? t.grad() : std::span<const real>();
  for (std::size_t i = 0; i < n; ++i) {
    const double g = pg.empty() ? 0.0 : static_cast<double>(pg[i]);
    if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient");
    s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * g;
    s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * g * g;
    const double m_hat = s.m[i] / bc1;
    const double v_hat = s.v[i] / bc2;
    pv[i] -= static_cast<real>(lr * m_hat / (std::sqrt(v_hat) + eps_));
  }
}

void Adam::step(const std::string& name, Tensor& t, double lr) { apply(state_[name], t, lr); }

void Adam::step(ComponentGraph& model, double lr) {
  for (auto& [name, t] : model.params) {
    if (model.frozen(name)) continue;
    apply(state_[name], t, lr);
  }
}

LrSchedule::LrSchedule(double lr, double decay, int patience)
    : lr_(lr), decay_(decay), patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (!(lr > 0)) throw std::invalid_argument("lr_schedule: lr must be > 0");
  if (patience < 1) throw std::invalid_argument("lr_schedule: patience must be >= 1");
}

void LrSchedule::observe(double dev_ppl) {
  if (dev_ppl < best_) {
    best_ = dev_ppl;
    bad_ = 0;
    return;
  }
  if (++bad_ == patience_) {
    lr_ *= decay_;
    bad_ = 0;
  }
}

double clip_gradients(ComponentGraph& model, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, t] : model.params) {
    if (model.frozen(name) || !t.has_grad()) continue;
    for (real g : t.grad()) {
      if (!std::isfinite(static_cast<double>(g))) throw std::runtime_error("non-finite gradient");
      sq += static_cast<double>(g) * static_cast<double>(g);
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const real scale = static_cast<real>(max_norm / norm);
    for (auto& [name, t] : model.params) {
      if (model.frozen(name) || !t.has_grad()) continue;
      for (real& g : t.grad()) g *= scale;
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// layer-wise growth

namespace {

std::string encoder_prefix(const ComponentGraph& model) {
  if (model.kind == "asr" || model.kind == "direct") return "asr.encoder";
  if (model.kind == "mt") return "mt.encoder";
  throw std::invalid_argument("layerwise growth expects an asr, mt, or direct model");
}

nlohmann::json& encoder_arch(ComponentGraph& model) {
  if (model.kind == "direct") return model.arch.at("asr").at("enc");
  return model.arch.at("enc");
}

void set_encoder_layers(ComponentGraph& model, int n) {
  encoder_arch(model)["num_layers"] = n;
}

// drop layers [keep, end) so growth can rebuild them
void truncate_encoder(ComponentGraph& model, int keep) {
  const std::string prefix = encoder_prefix(model);
  const int cur = encoder_layers(model);
  if (keep < 1 || keep > cur) throw std::invalid_argument("truncate_encoder: bad layer count");
  for (int l = keep; l < cur; ++l) {
    const std::string lp = prefix + ".layer" + std::to_string(l);
    for (const char* dir : {".fwd", ".bwd"})
      for (const char* part : {".w_x", ".w_h", ".b"}) model.params.erase(lp + dir + part);
  }
  set_encoder_layers(model, keep);
}

}  // namespace

int encoder_layers(const ComponentGraph& model) {
  const nlohmann::json& enc = model.kind == "direct" ? model.arch.at("asr").at("enc")
                                                     : model.arch.at("enc");
  return enc.at("num_layers").get<int>();
}

void layerwise_grow(ComponentGraph& model, int target_layers, Rng& rng) {
  const int cur = encoder_layers(model);
  if (cur >= target_layers) throw std::invalid_argument("layerwise_grow: growth beyond target");
  const std::string prefix = encoder_prefix(model);
  const int hidden = encoder_arch(model).at("hidden").get<int>();
  const int in_dim = cur == 0 ? encoder_arch(model).at("input_dim").get<int>() : 2 * hidden;
  const std::string lp = prefix + ".layer" + std::to_string(cur);
  for (const char* dir : {".fwd", ".bwd"}) {
    nn::LstmParams p = nn::init_lstm(in_dim, hidden, rng);
    model.params[lp + dir + ".w_x"] = p.w_x;
    model.params[lp + dir + ".w_h"] = p.w_h;
    model.params[lp + dir + ".b"] = p.b;
  }
  set_encoder_layers(model, cur + 1);
}

// ---------------------------------------------------------------------------
// training loops

namespace {

// per-example teacher-forced loss; returns summed CE and target token count
using LossFn = std::function<ForwardResult(Graph&, const ComponentGraph&, const CorpusTriple&,
                                           const ForwardOptions&)>;

LossFn loss_fn_for(const std::string& kind, double gamma, double aux_asr_weight) {
  if (kind == "asr")
    return [](Graph& g, const ComponentGraph& m, const CorpusTriple& t, const ForwardOptions& o) {
      return asr_forward(g, m, t.features, frame_tokens(t.transcript), o);
    };
  if (kind == "mt")
    return [](Graph& g, const ComponentGraph& m, const CorpusTriple& t, const ForwardOptions& o) {
      return mt_forward(g, m, t.transcript, frame_tokens(t.translation), o);
    };
  if (kind == "direct")
    return [](Graph& g, const ComponentGraph& m, const CorpusTriple& t, const ForwardOptions& o) {
      return direct_forward(g, m, t.features, frame_tokens(t.translation), o);
    };
  if (kind == "tight" || kind == "cascade")
    return [gamma, aux_asr_weight](Graph& g, const ComponentGraph& m, const CorpusTriple& t,
                                   const ForwardOptions& o) {
      if (t.transcript.empty())
        throw std::invalid_argument("finetune_tight: corpus missing transcripts");
      ForwardOptions asr_opt = o;
      asr_opt.want_posteriors = true;
      ForwardResult asr = asr_forward(g, m, t.features, frame_tokens(t.transcript), asr_opt);
      ForwardResult res = mt_forward(g, m, asr.posteriors, gamma, BridgeMode::kSoft,
                                     frame_tokens(t.translation), o);
      if (aux_asr_weight > 0)
        res.loss = g.add(res.loss, g.scale(asr.loss, static_cast<real>(aux_asr_weight)));
      return res;
    };
  throw std::invalid_argument("no training loss for model kind " + kind);
}

bool needs_translation(const std::string& kind) { return kind != "asr"; }

// keep examples whose token sequences fit; group by source length into batches
std::vector<std::vector<std::size_t>> make_batches(const Corpus& corpus, const std::string& kind,
                                                   const TrainConfig& cfg) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (static_cast<int>(corpus[i].transcript.size()) > cfg.max_seq_len) continue;
    if (needs_translation(kind) &&
        static_cast<int>(corpus[i].translation.size()) > cfg.max_seq_len)
      continue;
    keep.push_back(i);
  }
  std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
    const std::size_t la = kind == "mt" ? corpus[a].transcript.size() : corpus[a].features.dim(0);
    const std::size_t lb = kind == "mt" ? corpus[b].transcript.size() : corpus[b].features.dim(0);
    return la < lb;
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < keep.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end = std::min(keep.size(), i + static_cast<std::size_t>(cfg.batch_size));
    batches.emplace_back(keep.begin() + static_cast<std::ptrdiff_t>(i),
                         keep.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

double dev_ppl_value(const ComponentGraph& model, const Corpus& dev) {
  return dev.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : dev_perplexity(model, dev).value;
}

TrainResult train_loop(const ComponentGraph& init, const Corpus& train, const Corpus& dev,
                       const TrainConfig& cfg, double base_lr, double label_smoothing,
                       bool allow_growth) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train: empty corpus");

  TrainResult out;
  ComponentGraph model = init.clone();

  const bool growable = allow_growth && (model.kind == "asr" || model.kind == "mt" ||
                                         model.kind == "direct");
  const int target_layers = growable ? encoder_layers(model) : 0;
  Rng grow_rng(Rng::derive(cfg.seed, 0x6707ull));
  if (growable && cfg.grow_start_layers > 0 && cfg.grow_start_layers < target_layers)
    truncate_encoder(model, cfg.grow_start_layers);

  const LossFn loss_fn = loss_fn_for(model.kind, cfg.train_gamma, cfg.aux_asr_weight);
  Adam adam;
  LrSchedule schedule(base_lr, cfg.lr_decay, cfg.patience_checkpoints);

  ComponentGraph best;
  double best_ppl = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (growable && epoch > 0 && cfg.grow_every_epochs > 0 &&
        epoch % cfg.grow_every_epochs == 0 && encoder_layers(model) < target_layers)
      layerwise_grow(model, target_layers, grow_rng);

    auto batches = make_batches(train, model.kind, cfg);
    if (batches.empty()) throw std::invalid_argument("train: empty corpus after length filter");
    Rng shuffle_rng(Rng::derive(cfg.seed, 0x10000ull + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = batches.size(); i > 1; --i)
      std::swap(batches[i - 1],
                batches[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<long>(i) - 1))]);
    Rng dropout_rng(Rng::derive(cfg.seed, 0x20000ull + static_cast<std::uint64_t>(epoch)));

    double epoch_loss = 0;
    long epoch_tokens = 0;
    for (const auto& batch : batches) {
      long batch_tokens = 0;
      for (std::size_t idx : batch)
        batch_tokens += static_cast<long>((model.kind == "asr" ? train[idx].transcript.size()
                                                               : train[idx].translation.size()) +
                                          1);  // +EOS
      model.zero_grads();
      ForwardOptions opt;
      opt.label_smoothing = static_cast<real>(label_smoothing);
      opt.dropout = static_cast<real>(cfg.dropout);
      opt.training = true;
      opt.rng = &dropout_rng;
      for (std::size_t idx : batch) {
        Graph g;
        ForwardResult res = loss_fn(g, model, train[idx], opt);
        g.backward(g.scale(res.loss, static_cast<real>(1.0 / static_cast<double>(batch_tokens))));
        epoch_loss += static_cast<double>(res.loss.item());
        epoch_tokens += res.target_tokens;
      }
      clip_gradients(model, cfg.grad_clip);
      adam.step(model, schedule.lr());
    }

    TrainLogEntry entry;
    entry.epoch = epoch + 1;
    entry.train_loss = epoch_loss / static_cast<double>(std::max<long>(1, epoch_tokens));
    entry.lr = schedule.lr();
    entry.dev_ppl = dev_ppl_value(model, dev);
    out.log.push_back(entry);

    const double score = dev.empty() ? entry.train_loss : entry.dev_ppl;
    if (score < best_ppl && (!growable || encoder_layers(model) == target_layers)) {
      best_ppl = score;
      best = model.clone();
    }
    if (!dev.empty()) schedule.observe(entry.dev_ppl);
  }

  out.model = best.params.empty() ? std::move(model) : std::move(best);
  return out;
}

}  // namespace

ScoreReport dev_perplexity(const ComponentGraph& model, const Corpus& dev) {
  if (dev.empty()) throw std::invalid_argument("dev_perplexity: empty corpus");
  const double gamma =
      (model.kind == "tight" || model.kind == "cascade") ? bridge_config(model).train_gamma : 1.0;
  const LossFn loss_fn = loss_fn_for(model.kind, gamma, 0.0);
  double ce = 0;
  long tokens = 0;
  ForwardOptions opt;  // no smoothing, no dropout
  for (const auto& t : dev) {
    Graph g;
    g.set_grad_enabled(false);
    ForwardResult res = loss_fn(g, model, t, opt);
    ce += static_cast<double>(res.loss.item());
    tokens += res.target_tokens;
  }
  return perplexity_report(ce, tokens);
}

TrainResult pretrain(const ComponentGraph& model, const Corpus& train, const Corpus& dev,
                     const TrainConfig& cfg) {
  if (model.kind != "asr" && model.kind != "mt" && model.kind != "direct")
    throw std::invalid_argument("pretrain: expects an asr, mt, or direct model");
  return train_loop(model, train, dev, cfg, cfg.lr, cfg.label_smoothing, /*allow_growth=*/true);
}

TrainResult finetune_tight(const ComponentGraph& tight, const Corpus& train, const Corpus& dev,
                           const FreezeMask& mask, const TrainConfig& cfg) {
  if (tight.kind != "tight")
    throw std::invalid_argument("finetune_tight: expects a tight model");
  ComponentGraph model = tight.clone();
  apply_freeze(model, mask);
  return train_loop(model, train, dev, cfg, cfg.finetune_lr, cfg.finetune_label_smoothing,
                    /*allow_growth=*/false);
}

}  // namespace stc
