#include "stc/models.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

#include "stc/config.hpp"

namespace stc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint/corpus writers assume a little-endian host");

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool prefix_matches(const std::string& name, const std::string& prefix) {
  if (name.size() < prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return false;
  return name.size() == prefix.size() || prefix.back() == '.' || name[prefix.size()] == '.';
}

}  // namespace

Tensor& ComponentGraph::param(const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Tensor& ComponentGraph::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

bool ComponentGraph::frozen(const std::string& name) const {
  auto it = freeze.find(name);
  return it != freeze.end() && it->second;
}

void ComponentGraph::zero_grads() {
  for (auto& [name, t] : params) t.zero_grad();
}

ComponentGraph ComponentGraph::clone() const {
  ComponentGraph out;
  out.kind = kind;
  out.arch = arch;
  out.freeze = freeze;
  for (const auto& [name, t] : params) out.params[name] = t.clone();
  return out;
}

nlohmann::json encoder_config_to_json(const EncoderConfig& c) {
  return {{"num_layers", c.num_layers},
          {"hidden", c.hidden},
          {"pool_factors", c.pool_factors},
          {"embed_dim", c.embed_dim},
          {"input_dim", c.input_dim}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.pool_factors = j.at("pool_factors").get<std::vector<int>>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.input_dim = j.at("input_dim").get<int>();
  return c;
}

nlohmann::json decoder_config_to_json(const DecoderConfig& c) {
  return {{"hidden", c.hidden}, {"embed_dim", c.embed_dim}, {"attention_dim", c.attention_dim}};
}

DecoderConfig decoder_config_from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.attention_dim = j.at("attention_dim").get<int>();
  return c;
}

// ---------------------------------------------------------------------------
// initialization

namespace {

void add_lstm(ComponentGraph& cg, const std::string& prefix, const nn::LstmParams& p) {
  cg.params[prefix + ".w_x"] = p.w_x;
  cg.params[prefix + ".w_h"] = p.w_h;
  cg.params[prefix + ".b"] = p.b;
}

void add_encoder(ComponentGraph& cg, const std::string& prefix, const EncoderConfig& enc,
                 Rng& rng) {
  for (int l = 0; l < enc.num_layers; ++l) {
    const int in_dim = l == 0 ? enc.input_dim : 2 * enc.hidden;
    add_lstm(cg, prefix + ".layer" + std::to_string(l) + ".fwd",
             nn::init_lstm(in_dim, enc.hidden, rng));
    add_lstm(cg, prefix + ".layer" + std::to_string(l) + ".bwd",
             nn::init_lstm(in_dim, enc.hidden, rng));
  }
}

void add_decoder(ComponentGraph& cg, const std::string& prefix, const DecoderConfig& dec,
                 int key_dim, int vocab, Rng& rng) {
  cg.params[prefix + ".embed"] = nn::init_weight(
      {static_cast<std::size_t>(vocab), static_cast<std::size_t>(dec.embed_dim)},
      static_cast<std::size_t>(dec.embed_dim), rng);
  add_lstm(cg, prefix + ".cell", nn::init_lstm(dec.embed_dim, dec.hidden, rng));
  nn::AttentionParams attn = nn::init_attention(dec.hidden, key_dim, dec.attention_dim, rng);
  cg.params[prefix + ".attn.w_q"] = attn.w_q;
  cg.params[prefix + ".attn.w_k"] = attn.w_k;
  cg.params[prefix + ".attn.v"] = attn.v;
  const std::size_t proj_in = static_cast<std::size_t>(dec.hidden + key_dim);
  cg.params[prefix + ".out.w"] =
      nn::init_weight({static_cast<std::size_t>(vocab), proj_in}, proj_in, rng);
  Tensor b = Tensor::zeros({static_cast<std::size_t>(vocab)});
  b.set_requires_grad(true);
  cg.params[prefix + ".out.b"] = b;
}

}  // namespace

ComponentGraph init_asr(const EncoderConfig& enc_in, const DecoderConfig& dec,
                        const Vocabulary& src_vocab, int feat_dim, std::uint64_t seed) {
  EncoderConfig enc = enc_in;
  enc.embed_dim = 0;
  enc.input_dim = feat_dim;
  ComponentGraph cg;
  cg.kind = "asr";
  Rng rng(seed);
  add_encoder(cg, "asr.encoder", enc, rng);
  add_decoder(cg, "asr.decoder", dec, 2 * enc.hidden, src_vocab.size(), rng);
  cg.arch = {{"feat_dim", feat_dim},
             {"src_vocab", src_vocab.to_json()},
             {"enc", encoder_config_to_json(enc)},
             {"dec", decoder_config_to_json(dec)}};
  return cg;
}

ComponentGraph init_mt(const EncoderConfig& enc_in, const DecoderConfig& dec,
                       const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                       std::uint64_t seed) {
  EncoderConfig enc = enc_in;
  require(enc.embed_dim > 0, "init_mt: embed_dim must be > 0");
  enc.input_dim = enc.embed_dim;
  ComponentGraph cg;
  cg.kind = "mt";
  Rng rng(seed);
  cg.params["mt.encoder.embed"] = nn::init_weight(
      {static_cast<std::size_t>(src_vocab.size()), static_cast<std::size_t>(enc.embed_dim)},
      static_cast<std::size_t>(enc.embed_dim), rng);
  EncoderConfig enc_layers_only = enc;
  enc_layers_only.embed_dim = 0;  // embed handled above
  add_encoder(cg, "mt.encoder", enc_layers_only, rng);
  add_decoder(cg, "mt.decoder", dec, 2 * enc.hidden, tgt_vocab.size(), rng);
  cg.arch = {{"src_vocab", src_vocab.to_json()},
             {"tgt_vocab", tgt_vocab.to_json()},
             {"enc", encoder_config_to_json(enc)},
             {"dec", decoder_config_to_json(dec)}};
  return cg;
}

// ---------------------------------------------------------------------------
// composition

const nlohmann::json& asr_arch(const ComponentGraph& cg) {
  if (cg.kind == "asr") return cg.arch;
  if (cg.kind == "cascade" || cg.kind == "tight" || cg.kind == "direct")
    return cg.arch.at("asr");
  throw std::invalid_argument("model kind " + cg.kind + " has no ASR side");
}

const nlohmann::json& mt_arch(const ComponentGraph& cg) {
  if (cg.kind == "mt") return cg.arch;
  if (cg.kind == "cascade" || cg.kind == "tight" || cg.kind == "direct") return cg.arch.at("mt");
  throw std::invalid_argument("model kind " + cg.kind + " has no MT side");
}

Vocabulary source_vocab(const ComponentGraph& cg) {
  if (cg.kind == "asr") return Vocabulary::from_json(cg.arch.at("src_vocab"));
  if (cg.kind == "mt") return Vocabulary::from_json(cg.arch.at("src_vocab"));
  return Vocabulary::from_json(asr_arch(cg).at("src_vocab"));
}

Vocabulary target_vocab(const ComponentGraph& cg) {
  if (cg.kind == "mt") return Vocabulary::from_json(cg.arch.at("tgt_vocab"));
  if (cg.kind == "asr") throw std::invalid_argument("asr model has no target vocabulary");
  return Vocabulary::from_json(mt_arch(cg).at("tgt_vocab"));
}

BridgeConfig bridge_config(const ComponentGraph& cg) {
  BridgeConfig b;
  if (!cg.arch.contains("bridge")) return b;
  const auto& j = cg.arch.at("bridge");
  b.train_gamma = j.at("train_gamma").get<double>();
  b.decode_gamma = j.at("decode_gamma").get<double>();
  b.mode = j.at("mode").get<std::string>() == "one_hot" ? BridgeMode::kOneHot : BridgeMode::kSoft;
  return b;
}

ComponentGraph build_cascade(const ComponentGraph& asr, const ComponentGraph& mt) {
  require(asr.kind == "asr" && mt.kind == "mt", "build_cascade: expects asr and mt models");
  const auto asr_vocab = source_vocab(asr);
  const auto mt_src = source_vocab(mt);
  require(asr_vocab == mt_src, "build_cascade: vocabulary mismatch between ASR output and MT source");
  ComponentGraph cg;
  cg.kind = "cascade";
  for (const auto& [name, t] : asr.params) cg.params[name] = t.clone();
  for (const auto& [name, t] : mt.params) cg.params[name] = t.clone();
  require(cg.params.size() == asr.params.size() + mt.params.size(),
          "build_cascade: overlapping parameter names");
  cg.arch = {{"asr", asr.arch}, {"mt", mt.arch}};
  return cg;
}

ComponentGraph build_tight(const ComponentGraph& cascade, const BridgeConfig& bridge) {
  require(cascade.kind == "cascade" || cascade.kind == "tight",
          "build_tight: expects a cascade model");
  ComponentGraph cg = cascade.clone();
  cg.kind = "tight";
  cg.arch["bridge"] = {{"train_gamma", bridge.train_gamma},
                       {"decode_gamma", bridge.decode_gamma},
                       {"mode", bridge.mode == BridgeMode::kOneHot ? "one_hot" : "soft"}};
  return cg;
}

ComponentGraph build_direct(const ComponentGraph& asr, const ComponentGraph& mt, int adapter_dim,
                            std::uint64_t seed) {
  require(asr.kind == "asr" && mt.kind == "mt", "build_direct: expects asr and mt models");
  const EncoderConfig asr_enc = encoder_config_from_json(asr.arch.at("enc"));
  const EncoderConfig mt_enc = encoder_config_from_json(mt.arch.at("enc"));
  const int key_dim = 2 * mt_enc.hidden;  // what the mt decoder attention expects
  if (adapter_dim <= 0) adapter_dim = key_dim;
  require(adapter_dim == key_dim, "build_direct: adapter output must match mt attention key dim");
  ComponentGraph cg;
  cg.kind = "direct";
  // speech encoder and target decoder transplanted; asr.decoder and mt.encoder dropped
  for (const auto& [name, t] : asr.params)
    if (prefix_matches(name, "asr.encoder")) cg.params[name] = t.clone();
  for (const auto& [name, t] : mt.params)
    if (prefix_matches(name, "mt.decoder")) cg.params[name] = t.clone();
  Rng rng(seed);
  cg.params["adapter.w"] = nn::init_weight(
      {static_cast<std::size_t>(adapter_dim), static_cast<std::size_t>(2 * asr_enc.hidden)},
      static_cast<std::size_t>(2 * asr_enc.hidden), rng);
  Tensor b = Tensor::zeros({static_cast<std::size_t>(adapter_dim)});
  b.set_requires_grad(true);
  cg.params["adapter.b"] = b;
  cg.arch = {{"asr", asr.arch}, {"mt", mt.arch}, {"adapter_dim", adapter_dim}};
  return cg;
}

void apply_freeze(ComponentGraph& model, const FreezeMask& mask) {
  for (const auto& prefix : mask.frozen_prefixes) {
    bool any = false;
    for (const auto& [name, t] : model.params) {
      if (prefix_matches(name, prefix)) {
        model.freeze[name] = true;
        any = true;
      }
    }
    if (!any) throw std::invalid_argument("unknown freeze prefix: " + prefix);
  }
}

// ---------------------------------------------------------------------------
// views

namespace {

nn::LstmParams lstm_at(const ComponentGraph& cg, const std::string& prefix) {
  return {cg.param(prefix + ".w_x"), cg.param(prefix + ".w_h"), cg.param(prefix + ".b")};
}

Seq2SeqView make_view(const ComponentGraph& cg, const nlohmann::json& arch,
                      const std::string& enc_prefix, const std::string& dec_prefix,
                      int out_vocab) {
  Seq2SeqView v;
  v.enc_cfg = encoder_config_from_json(arch.at("enc"));
  v.dec_cfg = decoder_config_from_json(arch.at("dec"));
  for (int l = 0; l < v.enc_cfg.num_layers; ++l) {
    const std::string lp = enc_prefix + ".layer" + std::to_string(l);
    v.enc_layers.emplace_back(lstm_at(cg, lp + ".fwd"), lstm_at(cg, lp + ".bwd"));
  }
  if (cg.has_param(enc_prefix + ".embed")) v.enc_embed = cg.param(enc_prefix + ".embed");
  v.dec_embed = cg.param(dec_prefix + ".embed");
  v.dec_cell = lstm_at(cg, dec_prefix + ".cell");
  v.attn = {cg.param(dec_prefix + ".attn.w_q"), cg.param(dec_prefix + ".attn.w_k"),
            cg.param(dec_prefix + ".attn.v")};
  v.out_w = cg.param(dec_prefix + ".out.w");
  v.out_b = cg.param(dec_prefix + ".out.b");
  v.out_vocab = out_vocab;
  return v;
}

}  // namespace

Seq2SeqView asr_view(const ComponentGraph& cg) {
  const auto& arch = asr_arch(cg);
  return make_view(cg, arch, "asr.encoder", "asr.decoder",
                   Vocabulary::from_json(arch.at("src_vocab")).size());
}

Seq2SeqView mt_view(const ComponentGraph& cg) {
  const auto& arch = mt_arch(cg);
  return make_view(cg, arch, "mt.encoder", "mt.decoder",
                   Vocabulary::from_json(arch.at("tgt_vocab")).size());
}

DirectView direct_view(const ComponentGraph& cg) {
  require(cg.kind == "direct", "direct_view: expects a direct model");
  DirectView v;
  const auto& aarch = cg.arch.at("asr");
  const auto& march = cg.arch.at("mt");
  v.seq.enc_cfg = encoder_config_from_json(aarch.at("enc"));
  v.seq.dec_cfg = decoder_config_from_json(march.at("dec"));
  for (int l = 0; l < v.seq.enc_cfg.num_layers; ++l) {
    const std::string lp = "asr.encoder.layer" + std::to_string(l);
    v.seq.enc_layers.emplace_back(lstm_at(cg, lp + ".fwd"), lstm_at(cg, lp + ".bwd"));
  }
  v.seq.dec_embed = cg.param("mt.decoder.embed");
  v.seq.dec_cell = lstm_at(cg, "mt.decoder.cell");
  v.seq.attn = {cg.param("mt.decoder.attn.w_q"), cg.param("mt.decoder.attn.w_k"),
                cg.param("mt.decoder.attn.v")};
  v.seq.out_w = cg.param("mt.decoder.out.w");
  v.seq.out_b = cg.param("mt.decoder.out.b");
  v.seq.out_vocab = Vocabulary::from_json(march.at("tgt_vocab")).size();
  v.adapter_w = cg.param("adapter.w");
  v.adapter_b = cg.param("adapter.b");
  return v;
}

// ---------------------------------------------------------------------------
// forward passes

std::vector<int> frame_tokens(const std::vector<int>& inner) {
  std::vector<int> out;
  out.reserve(inner.size() + 2);
  out.push_back(Vocabulary::kBos);
  out.insert(out.end(), inner.begin(), inner.end());
  out.push_back(Vocabulary::kEos);
  return out;
}

std::vector<int> inner_tokens(const std::vector<int>& framed) {
  require(framed.size() >= 2 && framed.front() == Vocabulary::kBos &&
              framed.back() == Vocabulary::kEos,
          "token sequence must be framed with BOS and EOS");
  return {framed.begin() + 1, framed.end() - 1};
}

Tensor encode_rows(Graph& g, const Seq2SeqView& view, const Tensor& rows,
                   const ForwardOptions& opt) {
  Tensor out = nn::bilstm_encode(g, view.enc_layers, view.enc_cfg.pool_factors, rows);
  if (opt.training && opt.dropout > 0 && opt.rng)
    out = nn::dropout(g, out, opt.dropout, true, *opt.rng);
  return out;
}

ForwardResult teacher_forced_decode(Graph& g, const Seq2SeqView& view, const Tensor& enc_out,
                                    const std::vector<int>& target_inner,
                                    const ForwardOptions& opt) {
  const std::size_t hd = static_cast<std::size_t>(view.dec_cfg.hidden);
  Tensor keys_proj = nn::attention_project_keys(g, view.attn, enc_out);
  Tensor h = Tensor::zeros({hd}), c = Tensor::zeros({hd});
  std::vector<int> fed = {Vocabulary::kBos};
  fed.insert(fed.end(), target_inner.begin(), target_inner.end());
  std::vector<int> predicted = target_inner;
  predicted.push_back(Vocabulary::kEos);

  ForwardResult res;
  res.target_tokens = static_cast<int>(predicted.size());
  Tensor loss;
  std::vector<Tensor> posterior_rows;
  for (std::size_t step = 0; step < fed.size(); ++step) {
    Tensor x = g.row(g.embed_rows(view.dec_embed, {fed[step]}), 0);
    if (opt.training && opt.dropout > 0 && opt.rng)
      x = nn::dropout(g, x, opt.dropout, true, *opt.rng);
    std::tie(h, c) = nn::lstm_step(g, view.dec_cell, x, h, c);
    auto [context, weights] = nn::additive_attention(g, view.attn, h, enc_out, keys_proj);
    Tensor logits = g.add(g.matvec(view.out_w, g.concat({h, context})), view.out_b);
    Tensor step_loss = nn::label_smoothed_ce(g, logits, predicted[step], opt.label_smoothing);
    loss = loss.defined() ? g.add(loss, step_loss) : step_loss;
    if (opt.want_posteriors) posterior_rows.push_back(g.softmax(logits, 0));
  }
  res.loss = loss;
  if (opt.want_posteriors) res.posteriors = g.stack_rows(posterior_rows);
  return res;
}

ForwardResult asr_forward(Graph& g, const ComponentGraph& cg, const Tensor& frames,
                          const std::vector<int>& transcript, const ForwardOptions& opt) {
  require(frames.ndim() == 2 && frames.dim(0) > 0, "asr_forward: empty frames");
  const std::vector<int> inner = inner_tokens(transcript);
  Seq2SeqView view = asr_view(cg);
  Tensor enc_out = encode_rows(g, view, frames, opt);
  return teacher_forced_decode(g, view, enc_out, inner, opt);
}

ForwardResult mt_forward(Graph& g, const ComponentGraph& cg, const std::vector<int>& source_inner,
                         const std::vector<int>& target, const ForwardOptions& opt) {
  require(!source_inner.empty(), "mt_forward: empty source");
  Seq2SeqView view = mt_view(cg);
  std::vector<int> src = source_inner;
  src.push_back(Vocabulary::kEos);
  Tensor rows = nn::embed(g, view.enc_embed, src);
  Tensor enc_out = encode_rows(g, view, rows, opt);
  return teacher_forced_decode(g, view, enc_out, inner_tokens(target), opt);
}

ForwardResult mt_forward(Graph& g, const ComponentGraph& cg, const Tensor& posterior_rows,
                         double gamma, BridgeMode mode, const std::vector<int>& target,
                         const ForwardOptions& opt) {
  require(posterior_rows.ndim() == 2 && posterior_rows.dim(0) > 0, "mt_forward: empty source");
  Seq2SeqView view = mt_view(cg);
  Tensor rows = bridge_forward(g, posterior_rows, gamma, mode, view.enc_embed);
  Tensor enc_out = encode_rows(g, view, rows, opt);
  return teacher_forced_decode(g, view, enc_out, inner_tokens(target), opt);
}

ForwardResult direct_forward(Graph& g, const ComponentGraph& cg, const Tensor& frames,
                             const std::vector<int>& target, const ForwardOptions& opt) {
  require(frames.ndim() == 2 && frames.dim(0) > 0, "direct_forward: empty frames");
  DirectView v = direct_view(cg);
  Tensor enc_out = nn::bilstm_encode(g, v.seq.enc_layers, v.seq.enc_cfg.pool_factors, frames);
  Tensor adapted = g.add_rowvec(g.matmul_nt(enc_out, v.adapter_w), v.adapter_b);
  if (opt.training && opt.dropout > 0 && opt.rng)
    adapted = nn::dropout(g, adapted, opt.dropout, true, *opt.rng);
  return teacher_forced_decode(g, v.seq, adapted, inner_tokens(target), opt);
}

// ---------------------------------------------------------------------------
// checkpoint container

namespace {

constexpr char kMagic[8] = {'S', 'T', 'C', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& off) {
  if (off + sizeof(T) > in.size()) throw std::runtime_error("truncated checkpoint");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

std::string checkpoint_bytes(const ComponentGraph& cg) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  nlohmann::json meta = {{"kind", cg.kind}, {"arch", cg.arch}, {"freeze", cg.freeze}};
  const std::string meta_str = meta.dump();
  put<std::uint64_t>(out, meta_str.size());
  out += meta_str;
  put<std::uint64_t>(out, cg.params.size());
  for (const auto& [name, t] : cg.params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.ndim()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (real x : t.values()) put<double>(out, static_cast<double>(x));
  }
  return out;
}

void save_checkpoint(const ComponentGraph& cg, const std::string& path) {
  write_file_atomic(path, checkpoint_bytes(cg));
}

ComponentGraph load_checkpoint(const std::string& path) {
  const std::string in = read_file(path);
  std::size_t off = 0;
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  off = sizeof(kMagic);
  const auto version = get<std::uint32_t>(in, off);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = get<std::uint64_t>(in, off);
  if (off + meta_len > in.size()) throw std::runtime_error("truncated checkpoint");
  nlohmann::json meta = nlohmann::json::parse(in.substr(off, meta_len));
  off += meta_len;
  ComponentGraph cg;
  cg.kind = meta.at("kind").get<std::string>();
  cg.arch = meta.at("arch");
  cg.freeze = meta.at("freeze").get<std::map<std::string, bool>>();
  const auto n = get<std::uint64_t>(in, off);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto name_len = get<std::uint32_t>(in, off);
    if (off + name_len > in.size()) throw std::runtime_error("truncated checkpoint");
    const std::string name = in.substr(off, name_len);
    off += name_len;
    const auto ndim = get<std::uint32_t>(in, off);
    Shape shape(ndim);
    for (auto& d : shape) d = get<std::uint64_t>(in, off);
    std::vector<real> data(shape_numel(shape));
    for (auto& x : data) x = static_cast<real>(get<double>(in, off));
    Tensor t = Tensor::from(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    cg.params[name] = t;
  }
  return cg;
}

}  // namespace stc
