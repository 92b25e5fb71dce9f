#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stc/bridge.hpp"
#include "stc/layers.hpp"
#include "stc/vocab.hpp"

namespace stc {

// Named parameter tensors plus architecture metadata for one model. Parameter
// names are hierarchical (asr.encoder.layer0.fwd.w_x); freeze flags use the
// same names.
struct ComponentGraph {
  std::string kind;  // asr | mt | direct | cascade | tight
  std::map<std::string, Tensor> params;
  std::map<std::string, bool> freeze;
  nlohmann::json arch;

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  bool has_param(const std::string& name) const { return params.count(name) > 0; }
  bool frozen(const std::string& name) const;
  void zero_grads();
  ComponentGraph clone() const;  // deep copy of tensors and metadata
};

struct FreezeMask {
  std::vector<std::string> frozen_prefixes;
};

nlohmann::json encoder_config_to_json(const EncoderConfig& c);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);
nlohmann::json decoder_config_to_json(const DecoderConfig& c);
DecoderConfig decoder_config_from_json(const nlohmann::json& j);

ComponentGraph init_asr(const EncoderConfig& enc, const DecoderConfig& dec,
                        const Vocabulary& src_vocab, int feat_dim, std::uint64_t seed);
ComponentGraph init_mt(const EncoderConfig& enc, const DecoderConfig& dec,
                       const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                       std::uint64_t seed);

ComponentGraph build_cascade(const ComponentGraph& asr, const ComponentGraph& mt);
ComponentGraph build_tight(const ComponentGraph& cascade, const BridgeConfig& bridge);
ComponentGraph build_direct(const ComponentGraph& asr, const ComponentGraph& mt, int adapter_dim,
                            std::uint64_t seed);
void apply_freeze(ComponentGraph& model, const FreezeMask& mask);

// arch accessors
const nlohmann::json& asr_arch(const ComponentGraph& cg);
const nlohmann::json& mt_arch(const ComponentGraph& cg);
Vocabulary source_vocab(const ComponentGraph& cg);  // V_F (shared ASR target / MT source)
Vocabulary target_vocab(const ComponentGraph& cg);  // V_E for models with an MT side
BridgeConfig bridge_config(const ComponentGraph& cg);

// Resolved parameter views over one encoder-decoder inside a ComponentGraph.
struct Seq2SeqView {
  EncoderConfig enc_cfg;
  DecoderConfig dec_cfg;
  std::vector<std::pair<nn::LstmParams, nn::LstmParams>> enc_layers;
  Tensor enc_embed;  // text encoders only
  Tensor dec_embed;
  nn::LstmParams dec_cell;
  nn::AttentionParams attn;
  Tensor out_w, out_b;
  int out_vocab = 0;
};

Seq2SeqView asr_view(const ComponentGraph& cg);
Seq2SeqView mt_view(const ComponentGraph& cg);

struct DirectView {
  Seq2SeqView seq;  // asr encoder + mt decoder
  Tensor adapter_w, adapter_b;
};
DirectView direct_view(const ComponentGraph& cg);

struct ForwardResult {
  Tensor loss;        // summed label-smoothed CE over steps
  Tensor posteriors;  // (J+1) x |V| softmax rows incl. the EOS step, when requested
  int target_tokens = 0;
};

struct ForwardOptions {
  real label_smoothing = 0;
  real dropout = 0;
  bool training = false;
  Rng* rng = nullptr;
  bool want_posteriors = false;
};

// encoder over already-embedded input rows (frames or text embeddings)
Tensor encode_rows(Graph& g, const Seq2SeqView& view, const Tensor& rows,
                   const ForwardOptions& opt);

// teacher-forced decode against target inner tokens (BOS/EOS added internally)
ForwardResult teacher_forced_decode(Graph& g, const Seq2SeqView& view, const Tensor& enc_out,
                                    const std::vector<int>& target_inner,
                                    const ForwardOptions& opt);

// transcript framed as [BOS, w_1..w_J, EOS]
ForwardResult asr_forward(Graph& g, const ComponentGraph& cg, const Tensor& frames,
                          const std::vector<int>& transcript, const ForwardOptions& opt);
// hard source tokens (inner, EOS appended internally); target framed [BOS..EOS]
ForwardResult mt_forward(Graph& g, const ComponentGraph& cg, const std::vector<int>& source_inner,
                         const std::vector<int>& target, const ForwardOptions& opt);
// posterior rows over V_F (incl. the EOS row) bridged into the MT embedding
ForwardResult mt_forward(Graph& g, const ComponentGraph& cg, const Tensor& posterior_rows,
                         double gamma, BridgeMode mode, const std::vector<int>& target,
                         const ForwardOptions& opt);
ForwardResult direct_forward(Graph& g, const ComponentGraph& cg, const Tensor& frames,
                             const std::vector<int>& target, const ForwardOptions& opt);

std::vector<int> frame_tokens(const std::vector<int>& inner);  // add BOS/EOS
std::vector<int> inner_tokens(const std::vector<int>& framed);

// Checkpoint container: version, arch metadata as JSON text, then per-tensor
// records (name, shape, little-endian f64). Byte layout in docs/checkpoint-format.md.
void save_checkpoint(const ComponentGraph& cg, const std::string& path);
ComponentGraph load_checkpoint(const std::string& path);
std::string checkpoint_bytes(const ComponentGraph& cg);

}  // namespace stc
