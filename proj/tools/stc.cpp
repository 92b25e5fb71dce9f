// stc: experiment driver for the synthetic speech-translation pipeline.
// Subcommands cover data generation, pretraining, cascade assembly, tight
// fine-tuning, decoding, gamma sweeps, evaluation, and model comparison.

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stc/config.hpp"
#include "stc/decoder.hpp"
#include "stc/metrics.hpp"
#include "stc/models.hpp"
#include "stc/synth.hpp"
#include "stc/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stc;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing

KvMap merged_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  KvMap kv;
  if (!config_path.empty()) kv = load_kv(config_path);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got: " + ov);
    kv[ov.substr(0, eq)] = ov.substr(eq + 1);
  }
  return kv;
}

void write_manifest(const fs::path& dir, const std::string& command, const KvMap& kv,
                    std::uint64_t seed, const std::vector<std::pair<std::string, fs::path>>& inputs) {
  json m;
  m["command"] = command;
  m["seed"] = seed;
  m["config"] = kv;
  m["config_hash"] = fnv1a64(kv_to_string(kv));
  json in = json::object();
  for (const auto& [name, path] : inputs)
    in[name] = {{"path", path.string()}, {"fnv1a64", fnv1a64(read_file(path.string()))}};
  m["inputs"] = in;
  fs::create_directories(dir);
  write_file_atomic((dir / "manifest.json").string(), m.dump(2) + "\n");
}

void write_token_lines(const fs::path& path, const std::vector<std::vector<int>>& lines,
                       const Vocabulary& vocab) {
  std::ostringstream os;
  for (const auto& toks : lines) {
    for (std::size_t i = 0; i < toks.size(); ++i) os << (i ? " " : "") << vocab.symbol(toks[i]);
    os << "\n";
  }
  write_file_atomic(path.string(), os.str());
}

std::vector<std::vector<std::string>> read_token_lines(const fs::path& path) {
  std::istringstream is(read_file(path.string()));
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    out.push_back(std::move(toks));
  }
  return out;
}

// map parallel string-token files onto shared integer ids
std::pair<TokenCorpus, TokenCorpus> to_ids(const std::vector<std::vector<std::string>>& refs,
                                           const std::vector<std::vector<std::string>>& hyps) {
  std::map<std::string, int> dict;
  auto conv = [&](const std::vector<std::vector<std::string>>& in) {
    TokenCorpus out;
    for (const auto& line : in) {
      std::vector<int> ids;
      for (const auto& tok : line) ids.push_back(dict.emplace(tok, static_cast<int>(dict.size())).first->second);
      out.push_back(std::move(ids));
    }
    return out;
  };
  return {conv(refs), conv(hyps)};
}

// aligned plain-text table plus a JSON twin with identical values
void write_table(const fs::path& txt_path, const fs::path& json_path,
                 const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, const json& twin) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c)
      os << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << row[c];
    os << "\n";
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  write_file_atomic(txt_path.string(), os.str());
  write_file_atomic(json_path.string(), twin.dump(2) + "\n");
  std::cout << os.str();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

SyntheticTaskSpec load_task(const fs::path& data_dir) {
  return SyntheticTaskSpec::from_json_string(read_file((data_dir / "task.json").string()));
}

void write_train_log(const fs::path& dir, const std::string& stem,
                     const std::vector<TrainLogEntry>& log) {
  std::vector<std::vector<std::string>> rows;
  json twin = json::array();
  for (const auto& e : log) {
    rows.push_back({std::to_string(e.epoch), fmt(e.train_loss), fmt(e.dev_ppl), fmt(e.lr, 6)});
    twin.push_back({{"epoch", e.epoch},
                    {"train_loss", e.train_loss},
                    {"dev_ppl", e.dev_ppl},
                    {"lr", e.lr}});
  }
  write_table(dir / (stem + ".txt"), dir / (stem + ".json"),
              {"epoch", "train_loss", "dev_ppl", "lr"}, rows, twin);
}

BridgeConfig effective_bridge(const ComponentGraph& model, const std::string& mode_flag,
                              double gamma_flag) {
  BridgeConfig b = bridge_config(model);
  if (model.kind == "cascade" && !model.arch.contains("bridge"))
    b.mode = BridgeMode::kOneHot;  // a plain cascade hands over hard tokens
  if (mode_flag == "soft") b.mode = BridgeMode::kSoft;
  if (mode_flag == "one_hot") b.mode = BridgeMode::kOneHot;
  if (gamma_flag > 0) b.decode_gamma = gamma_flag;
  return b;
}

struct DecodeOutputs {
  std::vector<std::vector<int>> transcripts, translations;
};

DecodeOutputs decode_corpus(const ComponentGraph& model, const Corpus& corpus,
                            const DecodeSettings& s, const BridgeConfig& bridge) {
  DecodeOutputs out;
  for (const auto& t : corpus) {
    if (model.kind == "asr") {
      out.transcripts.push_back(decode_asr(model, t.features, s));
    } else if (model.kind == "mt") {
      out.translations.push_back(decode_mt(model, t.transcript, s));
    } else if (model.kind == "direct") {
      out.translations.push_back(decode_direct(model, t.features, s));
    } else {
      TightDecodeResult r = decode_tight(model, t.features, bridge, s);
      out.transcripts.push_back(std::move(r.transcript));
      out.translations.push_back(std::move(r.translation));
    }
  }
  return out;
}

TokenCorpus column(const Corpus& corpus, bool transcript) {
  TokenCorpus out;
  for (const auto& t : corpus) out.push_back(transcript ? t.transcript : t.translation);
  return out;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_gen_data(const fs::path& out_dir, int n_train, int n_dev, int n_test, int letters,
                 int feat_dim, double noise_sigma, int min_len, int max_len, int frames_min,
                 int frames_max, const std::string& rule, std::uint64_t seed) {
  SyntheticTaskSpec task = make_task(letters, feat_dim, noise_sigma, seed,
                                     rule == "cipher" ? SyntheticTaskSpec::Rule::kCipher
                                                      : SyntheticTaskSpec::Rule::kCipherReverse);
  task.min_len = min_len;
  task.max_len = max_len;
  if (frames_min < 1 || frames_max < frames_min)
    throw std::invalid_argument("gen-data: frames range must satisfy 1 <= min <= max");
  task.frames_min = frames_min;
  task.frames_max = frames_max;
  Corpus all = gen_corpus(task, n_train + n_dev + n_test);
  fs::create_directories(out_dir);
  write_file_atomic((out_dir / "task.json").string(), task.to_json_string() + "\n");
  const Vocabulary src = task.src_vocab(), tgt = task.tgt_vocab();
  auto slice = [&](std::size_t lo, std::size_t hi) { return Corpus(all.begin() + lo, all.begin() + hi); };
  write_corpus((out_dir / "train").string(), slice(0, n_train), src, tgt);
  write_corpus((out_dir / "dev").string(), slice(n_train, n_train + n_dev), src, tgt);
  write_corpus((out_dir / "test").string(),
               slice(n_train + n_dev, n_train + n_dev + n_test), src, tgt);
  write_manifest(out_dir, "gen-data",
                 {{"seed", std::to_string(seed)},
                  {"noise_sigma", fmt(noise_sigma, 6)},
                  {"n_train", std::to_string(n_train)},
                  {"n_dev", std::to_string(n_dev)},
                  {"n_test", std::to_string(n_test)},
                  {"rule", rule}},
                 seed, {});
  std::cout << "wrote " << n_train << "/" << n_dev << "/" << n_test << " utterances to "
            << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const std::string& which, const fs::path& data_dir, const fs::path& out,
              const std::string& config_path, const std::vector<std::string>& overrides,
              int layers, int hidden, int embed, const std::string& pool) {
  KvMap kv = merged_config(config_path, overrides);
  TrainConfig cfg = TrainConfig::from_kv(kv);
  SyntheticTaskSpec task = load_task(data_dir);
  const Vocabulary src = task.src_vocab(), tgt = task.tgt_vocab();
  Corpus train = read_corpus((data_dir / "train").string(), src, tgt);
  Corpus dev = read_corpus((data_dir / "dev").string(), src, tgt);

  EncoderConfig enc;
  enc.num_layers = layers;
  enc.hidden = hidden;
  enc.embed_dim = embed;
  enc.pool_factors.clear();
  std::istringstream ps(pool);
  for (std::string tok; std::getline(ps, tok, ',');) enc.pool_factors.push_back(std::stoi(tok));
  DecoderConfig dec;
  dec.hidden = hidden;
  dec.embed_dim = embed;
  dec.attention_dim = hidden;

  ComponentGraph model = which == "asr"
                             ? init_asr(enc, dec, src, task.feature_dim, cfg.seed)
                             : init_mt(enc, dec, src, tgt, cfg.seed);
  TrainResult res = pretrain(model, train, dev, cfg);
  fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
  save_checkpoint(res.model, out.string());
  const fs::path dir = out.parent_path().empty() ? "." : out.parent_path();
  write_train_log(dir, out.stem().string() + "_log", res.log);
  write_manifest(dir, "train-" + which, kv, cfg.seed,
                 {{"train", (data_dir / "train.txt").string()},
                  {"dev", (data_dir / "dev.txt").string()},
                  {"task", (data_dir / "task.json").string()}});
  std::cout << "checkpoint: " << out.string() << "\n";
  return 0;
}

int cmd_build_cascade(const fs::path& asr_path, const fs::path& mt_path, const fs::path& out,
                      const std::string& kind, std::uint64_t seed) {
  ComponentGraph asr = load_checkpoint(asr_path.string());
  ComponentGraph mt = load_checkpoint(mt_path.string());
  ComponentGraph built = kind == "direct" ? build_direct(asr, mt, 0, seed)
                                          : build_cascade(asr, mt);
  fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
  save_checkpoint(built, out.string());
  write_manifest(out.parent_path().empty() ? "." : out.parent_path(), "build-cascade",
                 {{"kind", kind}}, seed, {{"asr", asr_path}, {"mt", mt_path}});
  std::cout << "checkpoint: " << out.string() << " (" << built.kind << ")\n";
  return 0;
}

int cmd_decode(const fs::path& model_path, const fs::path& data_prefix, const fs::path& out_dir,
               int beam, int max_len, double gamma, const std::string& mode) {
  ComponentGraph model = load_checkpoint(model_path.string());
  const fs::path data_dir = data_prefix.parent_path();
  SyntheticTaskSpec task = load_task(data_dir);
  const Vocabulary src = task.src_vocab(), tgt = task.tgt_vocab();
  Corpus corpus = read_corpus(data_prefix.string(), src, tgt);

  DecodeSettings s{beam, max_len};
  BridgeConfig bridge = effective_bridge(model, mode, gamma);
  DecodeOutputs out = decode_corpus(model, corpus, s, bridge);

  fs::create_directories(out_dir);
  if (!out.transcripts.empty()) {
    write_token_lines(out_dir / "hyp.transcript.txt", out.transcripts, src);
    write_token_lines(out_dir / "ref.transcript.txt", column(corpus, true), src);
  }
  if (!out.translations.empty()) {
    write_token_lines(out_dir / "hyp.translation.txt", out.translations, tgt);
    write_token_lines(out_dir / "ref.translation.txt", column(corpus, false), tgt);
  }
  write_manifest(out_dir, "decode",
                 {{"beam", std::to_string(beam)},
                  {"max_len", std::to_string(max_len)},
                  {"gamma", fmt(bridge.decode_gamma, 6)},
                  {"mode", bridge.mode == BridgeMode::kOneHot ? "one_hot" : "soft"}},
                 0, {{"model", model_path}});
  std::cout << "decoded " << corpus.size() << " utterances to " << out_dir.string() << "\n";
  return 0;
}

int cmd_finetune(const fs::path& model_path, const fs::path& data_dir, const fs::path& out,
                 const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::vector<std::string>& freeze, double train_gamma, double decode_gamma) {
  KvMap kv = merged_config(config_path, overrides);
  TrainConfig cfg = TrainConfig::from_kv(kv);
  cfg.train_gamma = train_gamma;
  SyntheticTaskSpec task = load_task(data_dir);
  const Vocabulary src = task.src_vocab(), tgt = task.tgt_vocab();
  Corpus train = read_corpus((data_dir / "train").string(), src, tgt);
  Corpus dev = read_corpus((data_dir / "dev").string(), src, tgt);

  ComponentGraph model = load_checkpoint(model_path.string());
  FreezeMask mask{freeze};
  TrainResult res;
  if (model.kind == "direct") {
    // the direct baseline trains on the same speech-to-target pairs with the
    // fine-tuning hyperparameters
    apply_freeze(model, mask);
    TrainConfig dcfg = cfg;
    dcfg.lr = cfg.finetune_lr;
    dcfg.label_smoothing = cfg.finetune_label_smoothing;
    res = pretrain(model, train, dev, dcfg);
  } else {
    BridgeConfig bridge;
    bridge.train_gamma = train_gamma;
    bridge.decode_gamma = decode_gamma;
    bridge.mode = BridgeMode::kSoft;
    ComponentGraph tight = model.kind == "tight" ? model : build_tight(model, bridge);
    res = finetune_tight(tight, train, dev, mask, cfg);
  }
  fs::create_directories(out.parent_path().empty() ? "." : out.parent_path());
  save_checkpoint(res.model, out.string());
  const fs::path dir = out.parent_path().empty() ? "." : out.parent_path();
  write_train_log(dir, out.stem().string() + "_log", res.log);
  write_manifest(dir, "finetune-tight", kv, cfg.seed,
                 {{"model", model_path}, {"train", data_dir / "train.txt"}});
  std::cout << "checkpoint: " << out.string() << "\n";
  return 0;
}

int cmd_gamma_sweep(const fs::path& model_path, const fs::path& data_prefix,
                    const fs::path& out_dir, std::vector<double> gammas, int beam, int max_len) {
  if (gammas.empty()) gammas = {0.5, 0.9, 1.0, 1.5, 2.0, 4.0, 32.0, 128.0, 1024.0};
  ComponentGraph model = load_checkpoint(model_path.string());
  if (model.kind != "cascade" && model.kind != "tight")
    throw std::invalid_argument("gamma-sweep: expects a cascade or tight checkpoint");
  SyntheticTaskSpec task = load_task(data_prefix.parent_path());
  const Vocabulary src = task.src_vocab(), tgt = task.tgt_vocab();
  Corpus corpus = read_corpus(data_prefix.string(), src, tgt);
  DecodeSettings s{beam, max_len};

  // one ASR pass per utterance; the MT side is re-decoded per gamma
  std::vector<std::vector<int>> transcripts;
  std::vector<Tensor> posteriors;
  for (const auto& t : corpus) {
    transcripts.push_back(decode_asr(model, t.features, s));
    posteriors.push_back(asr_posteriors_along(model, t.features, transcripts.back()));
  }
  const double asr_wer = wer(column(corpus, true), transcripts).value;

  std::vector<std::vector<std::string>> rows;
  json twin = json::array();
  for (double g : gammas) {
    TokenCorpus hyps;
    for (std::size_t i = 0; i < corpus.size(); ++i)
      hyps.push_back(decode_mt_soft(model, posteriors[i], g, BridgeMode::kSoft, s));
    const double b = bleu(column(corpus, false), hyps).value;
    const double t = ter_simplified(column(corpus, false), hyps).value;
    rows.push_back({fmt(g, 2), fmt(b), fmt(t)});
    twin.push_back({{"gamma", g}, {"bleu", b}, {"ter", t}});
  }
  fs::create_directories(out_dir);
  write_table(out_dir / "gamma_sweep.txt", out_dir / "gamma_sweep.json", {"gamma", "bleu", "ter"},
              rows, json{{"asr_wer", asr_wer}, {"rows", twin}});
  std::cout << "asr wer " << fmt(asr_wer) << "\n";
  write_manifest(out_dir, "gamma-sweep", {{"beam", std::to_string(beam)}}, 0,
                 {{"model", model_path}});
  return 0;
}

int cmd_evaluate(const fs::path& ref_path, const fs::path& hyp_path, const std::string& metric) {
  auto [refs, hyps] = to_ids(read_token_lines(ref_path), read_token_lines(hyp_path));
  if (refs.size() != hyps.size())
    throw std::invalid_argument("evaluate: ref and hyp line counts differ");
  if (metric == "wer" || metric == "all") std::cout << wer(refs, hyps).to_line() << "\n";
  if (metric == "bleu" || metric == "all") std::cout << bleu(refs, hyps).to_line() << "\n";
  if (metric == "ter" || metric == "all") std::cout << ter_simplified(refs, hyps).to_line() << "\n";
  return 0;
}

int cmd_compare(const std::vector<std::pair<std::string, fs::path>>& models,
                const fs::path& data_prefix, const fs::path& out_dir, int beam, int max_len) {
  SyntheticTaskSpec task = load_task(data_prefix.parent_path());
  const Vocabulary src = task.src_vocab(), tgt = task.tgt_vocab();
  Corpus corpus = read_corpus(data_prefix.string(), src, tgt);
  DecodeSettings s{beam, max_len};

  std::vector<std::vector<std::string>> rows;
  json twin = json::array();
  for (const auto& [label, path] : models) {
    ComponentGraph model = load_checkpoint(path.string());
    BridgeConfig bridge = effective_bridge(model, "", 0);
    DecodeOutputs out = decode_corpus(model, corpus, s, bridge);
    const double b = bleu(column(corpus, false), out.translations).value;
    const double t = ter_simplified(column(corpus, false), out.translations).value;
    const double w = out.transcripts.empty()
                         ? -1.0
                         : wer(column(corpus, true), out.transcripts).value;
    rows.push_back({label, fmt(b), fmt(t), out.transcripts.empty() ? std::string("-") : fmt(w)});
    twin.push_back({{"model", label},
                    {"bleu", b},
                    {"ter", t},
                    {"wer", out.transcripts.empty() ? json() : json(w)}});
  }
  fs::create_directories(out_dir);
  write_table(out_dir / "compare.txt", out_dir / "compare.json", {"model", "bleu", "ter", "wer"},
              rows, twin);
  write_manifest(out_dir, "compare", {{"beam", std::to_string(beam)}}, 0, {});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic speech-translation toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  std::string g_out;
  int g_train = 4000, g_dev = 400, g_test = 400, g_letters = 26, g_feat = 16;
  int g_min = 3, g_max = 12;
  int g_frames_min = 2, g_frames_max = 5;
  double g_sigma = 0.3;
  std::string g_rule = "cipher_reverse";
  std::uint64_t g_seed = 1;
  gen->add_option("--out", g_out, "output directory")->required();
  gen->add_option("--n-train", g_train);
  gen->add_option("--n-dev", g_dev);
  gen->add_option("--n-test", g_test);
  gen->add_option("--letters", g_letters);
  gen->add_option("--feat-dim", g_feat);
  gen->add_option("--noise-sigma", g_sigma);
  gen->add_option("--min-len", g_min);
  gen->add_option("--max-len", g_max);
  gen->add_option("--frames-min", g_frames_min, "frames emitted per letter, lower bound");
  gen->add_option("--frames-max", g_frames_max, "frames emitted per letter, upper bound");
  gen->add_option("--rule", g_rule)->check(CLI::IsMember({"cipher", "cipher_reverse"}));
  gen->add_option("--seed", g_seed);

  // shared training options
  std::string t_data, t_out, t_config, t_pool = "2";
  std::vector<std::string> t_set;
  int t_layers = 2, t_hidden = 64, t_embed = 32;
  auto add_train_opts = [&](CLI::App* c) {
    c->add_option("--data", t_data, "corpus directory (task.json, train.*, dev.*)")->required();
    c->add_option("--out", t_out, "checkpoint path")->required();
    c->add_option("--config", t_config, "key=value config file");
    c->add_option("--set", t_set, "config override key=value");
    c->add_option("--layers", t_layers);
    c->add_option("--hidden", t_hidden);
    c->add_option("--embed", t_embed);
    c->add_option("--pool", t_pool, "comma-separated pool factors");
  };
  auto* tasr = app.add_subcommand("train-asr", "pretrain the ASR model");
  add_train_opts(tasr);
  auto* tmt = app.add_subcommand("train-mt", "pretrain the MT model");
  add_train_opts(tmt);

  // build-cascade
  auto* bc = app.add_subcommand("build-cascade", "merge ASR and MT checkpoints");
  std::string b_asr, b_mt, b_out, b_kind = "cascade";
  std::uint64_t b_seed = 1;
  bc->add_option("--asr", b_asr)->required();
  bc->add_option("--mt", b_mt)->required();
  bc->add_option("--out", b_out)->required();
  bc->add_option("--kind", b_kind)->check(CLI::IsMember({"cascade", "direct"}));
  bc->add_option("--seed", b_seed, "adapter init seed for --kind direct");

  // decode
  auto* dec = app.add_subcommand("decode", "decode a corpus with any model kind");
  std::string d_model, d_data, d_out, d_mode;
  int d_beam = 12, d_maxlen = 75;
  double d_gamma = 0;
  dec->add_option("--model", d_model)->required();
  dec->add_option("--data", d_data, "corpus prefix, e.g. dir/test")->required();
  dec->add_option("--out-dir", d_out)->required();
  dec->add_option("--beam", d_beam);
  dec->add_option("--max-len", d_maxlen);
  dec->add_option("--gamma", d_gamma, "decode-time sharpening exponent");
  dec->add_option("--mode", d_mode)->check(CLI::IsMember({"soft", "one_hot"}));

  // finetune-tight
  auto* ft = app.add_subcommand("finetune-tight", "fine-tune a tight cascade (or direct model)");
  std::string f_model, f_data, f_out, f_config;
  std::vector<std::string> f_set, f_freeze;
  double f_tgamma = 1.0, f_dgamma = 2.0;
  ft->add_option("--model", f_model, "cascade, tight, or direct checkpoint")->required();
  ft->add_option("--data", f_data, "corpus directory")->required();
  ft->add_option("--out", f_out)->required();
  ft->add_option("--config", f_config);
  ft->add_option("--set", f_set);
  ft->add_option("--freeze", f_freeze, "parameter prefix to freeze (repeatable)");
  ft->add_option("--train-gamma", f_tgamma);
  ft->add_option("--decode-gamma", f_dgamma);

  // gamma-sweep
  auto* gs = app.add_subcommand("gamma-sweep", "decode across a gamma grid");
  std::string s_model, s_data, s_out;
  std::vector<double> s_gammas;
  int s_beam = 12, s_maxlen = 75;
  gs->add_option("--model", s_model)->required();
  gs->add_option("--data", s_data, "corpus prefix")->required();
  gs->add_option("--out-dir", s_out)->required();
  gs->add_option("--gammas", s_gammas);
  gs->add_option("--beam", s_beam);
  gs->add_option("--max-len", s_maxlen);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score hypothesis files against references");
  std::string e_ref, e_hyp, e_metric = "all";
  ev->add_option("--ref", e_ref)->required();
  ev->add_option("--hyp", e_hyp)->required();
  ev->add_option("--metric", e_metric)->check(CLI::IsMember({"all", "wer", "bleu", "ter"}));

  // compare
  auto* cp = app.add_subcommand("compare", "cascade vs tight vs direct on one test set");
  std::string c_cascade, c_tight, c_direct, c_data, c_out;
  int c_beam = 12, c_maxlen = 75;
  cp->add_option("--cascade", c_cascade);
  cp->add_option("--tight", c_tight);
  cp->add_option("--direct", c_direct);
  cp->add_option("--data", c_data, "corpus prefix")->required();
  cp->add_option("--out-dir", c_out)->required();
  cp->add_option("--beam", c_beam);
  cp->add_option("--max-len", c_maxlen);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_data(g_out, g_train, g_dev, g_test, g_letters, g_feat, g_sigma, g_min, g_max,
                          g_frames_min, g_frames_max, g_rule, g_seed);
    if (tasr->parsed())
      return cmd_train("asr", t_data, t_out, t_config, t_set, t_layers, t_hidden, t_embed, t_pool);
    if (tmt->parsed())
      return cmd_train("mt", t_data, t_out, t_config, t_set, t_layers, t_hidden, t_embed, t_pool);
    if (bc->parsed()) return cmd_build_cascade(b_asr, b_mt, b_out, b_kind, b_seed);
    if (dec->parsed()) return cmd_decode(d_model, d_data, d_out, d_beam, d_maxlen, d_gamma, d_mode);
    if (ft->parsed())
      return cmd_finetune(f_model, f_data, f_out, f_config, f_set, f_freeze, f_tgamma, f_dgamma);
    if (gs->parsed()) return cmd_gamma_sweep(s_model, s_data, s_out, s_gammas, s_beam, s_maxlen);
    if (ev->parsed()) return cmd_evaluate(e_ref, e_hyp, e_metric);
    if (cp->parsed()) {
      std::vector<std::pair<std::string, fs::path>> models;
      if (!c_cascade.empty()) models.emplace_back("cascade", c_cascade);
      if (!c_direct.empty()) models.emplace_back("direct", c_direct);
      if (!c_tight.empty()) models.emplace_back("tight", c_tight);
      if (models.empty()) throw std::invalid_argument("compare: no model checkpoints given");
      return cmd_compare(models, c_data, c_out, c_beam, c_maxlen);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
