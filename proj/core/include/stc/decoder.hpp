#pragma once

#include <memory>
#include <vector>

#include "stc/bridge.hpp"
#include "stc/models.hpp"

namespace stc {

struct Hypothesis {
  std::vector<int> tokens;  // after BOS; ends with EOS unless force-finished
  double log_prob = 0.0;
  int state = -1;  // recurrent-state handle owned by the Stepper
  bool finished = false;
};

// Autoregressive step interface used by beam search. A state handle denotes a
// consumed prefix; log_probs gives the next-token distribution at that state.
class Stepper {
 public:
  virtual ~Stepper() = default;
  virtual int start_state() = 0;  // prefix = [BOS]
  virtual const std::vector<double>& log_probs(int state) = 0;
  virtual int advance(int state, int token) = 0;
};

// Standard beam search over the full vocabulary, no length normalization.
// Finished hypotheses compete with live ones by raw total log probability.
// Ties break by (higher log_prob, then lexicographically smaller token ids).
std::vector<Hypothesis> beam_search(Stepper& stepper, int beam_size, int max_len,
                                    int eos_id = Vocabulary::kEos);

Hypothesis greedy_decode(Stepper& stepper, int max_len, int eos_id = Vocabulary::kEos);

struct DecodeSettings {
  int beam_size = 12;
  int max_len = 75;
};

// tokens returned without BOS/EOS framing
std::vector<int> decode_asr(const ComponentGraph& cg, const Tensor& frames,
                            const DecodeSettings& s);
std::vector<int> decode_mt(const ComponentGraph& cg, const std::vector<int>& source_inner,
                           const DecodeSettings& s);
// MT decode over bridged posterior rows (rows include the EOS step)
std::vector<int> decode_mt_soft(const ComponentGraph& cg, const Tensor& posterior_rows,
                                double gamma, BridgeMode mode, const DecodeSettings& s);
std::vector<int> decode_direct(const ComponentGraph& cg, const Tensor& frames,
                               const DecodeSettings& s);

// Teacher-forced ASR posteriors along a fixed transcript (inner tokens).
// Returns (J+1) x |V_F| rows including the EOS step.
Tensor asr_posteriors_along(const ComponentGraph& cg, const Tensor& frames,
                            const std::vector<int>& transcript_inner);

struct TightDecodeResult {
  std::vector<int> transcript;
  std::vector<int> translation;
};

// Two-pass decode: ASR beam -> best transcript; posteriors conditioned on that
// transcript, sharpened with decode_gamma, bridged into the MT beam. In
// one_hot mode the bridge rows are the transcript one-hots, which reproduces
// the vanilla cascade exactly.
TightDecodeResult decode_tight(const ComponentGraph& cg, const Tensor& frames,
                               const BridgeConfig& bridge, const DecodeSettings& s);

}  // namespace stc
