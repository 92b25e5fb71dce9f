#include "stc/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stc {

namespace {

bool tokens_less(const std::vector<int>& a, int a_tail, const std::vector<int>& b, int b_tail) {
  const std::size_t na = a.size() + 1, nb = b.size() + 1;
  for (std::size_t i = 0; i < std::min(na, nb); ++i) {
    const int x = i < a.size() ? a[i] : a_tail;
    const int y = i < b.size() ? b[i] : b_tail;
    if (x != y) return x < y;
  }
  return na < nb;
}

}  // namespace

std::vector<Hypothesis> beam_search(Stepper& stepper, int beam_size, int max_len, int eos_id) {
  if (beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be >= 1");
  if (max_len < 1) throw std::invalid_argument("beam_search: max_len must be >= 1");

  struct Candidate {
    std::size_t parent;
    int token;
    double log_prob;
  };

  std::vector<Hypothesis> live;
  live.push_back(Hypothesis{{}, 0.0, stepper.start_state(), false});
  std::vector<Hypothesis> finished;

  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto& lp = stepper.log_probs(live[i].state);
      cands.reserve(cands.size() + lp.size());
      for (std::size_t tok = 0; tok < lp.size(); ++tok)
        cands.push_back({i, static_cast<int>(tok), live[i].log_prob + lp[tok]});
    }
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(beam_size), cands.size());
    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return tokens_less(live[a.parent].tokens, a.token, live[b.parent].tokens, b.token);
    };
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep),
                      cands.end(), better);
    cands.resize(keep);

    std::vector<Hypothesis> next;
    for (const Candidate& c : cands) {
      Hypothesis h;
      h.tokens = live[c.parent].tokens;
      h.tokens.push_back(c.token);
      h.log_prob = c.log_prob;
      if (c.token == eos_id || static_cast<int>(h.tokens.size()) == max_len) {
        h.finished = true;
        h.state = live[c.parent].state;
        finished.push_back(std::move(h));
      } else {
        h.state = stepper.advance(live[c.parent].state, c.token);
        next.push_back(std::move(h));
      }
    }
    live = std::move(next);
  }

  std::sort(finished.begin(), finished.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(),
                                        b.tokens.end());
  });
  if (finished.size() > static_cast<std::size_t>(beam_size))
    finished.resize(static_cast<std::size_t>(beam_size));
  return finished;
}

Hypothesis greedy_decode(Stepper& stepper, int max_len, int eos_id) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  Hypothesis h;
  h.state = stepper.start_state();
  for (int step = 0; step < max_len; ++step) {
    const auto& lp = stepper.log_probs(h.state);
    std::size_t best = 0;
    for (std::size_t tok = 1; tok < lp.size(); ++tok)
      if (lp[tok] > lp[best]) best = tok;
    h.tokens.push_back(static_cast<int>(best));
    h.log_prob += lp[best];
    if (static_cast<int>(best) == eos_id || static_cast<int>(h.tokens.size()) == max_len) {
      h.finished = true;
      return h;
    }
    h.state = stepper.advance(h.state, static_cast<int>(best));
  }
  h.finished = true;
  return h;
}

// ---------------------------------------------------------------------------
// neural stepper

namespace {

class NeuralStepper : public Stepper {
 public:
  NeuralStepper(Graph& g, const Seq2SeqView& view, Tensor enc_out)
      : g_(g), view_(view), enc_out_(std::move(enc_out)) {
    keys_proj_ = nn::attention_project_keys(g_, view_.attn, enc_out_);
  }

  int start_state() override {
    const std::size_t hd = static_cast<std::size_t>(view_.dec_cfg.hidden);
    return step(Tensor::zeros({hd}), Tensor::zeros({hd}), Vocabulary::kBos);
  }

  const std::vector<double>& log_probs(int state) override {
    return states_.at(static_cast<std::size_t>(state)).logp;
  }

  int advance(int state, int token) override {
    const auto& s = states_.at(static_cast<std::size_t>(state));
    return step(s.h, s.c, token);
  }

 private:
  struct State {
    Tensor h, c;
    std::vector<double> logp;
  };

  int step(const Tensor& h_in, const Tensor& c_in, int token) {
    Tensor x = g_.row(g_.embed_rows(view_.dec_embed, {token}), 0);
    auto [h, c] = nn::lstm_step(g_, view_.dec_cell, x, h_in, c_in);
    auto [context, weights] = nn::additive_attention(g_, view_.attn, h, enc_out_, keys_proj_);
    Tensor logits = g_.add(g_.matvec(view_.out_w, g_.concat({h, context})), view_.out_b);
    Tensor ls = g_.log_softmax(logits, 0);
    State s;
    s.h = h;
    s.c = c;
    s.logp.assign(ls.values().begin(), ls.values().end());
    states_.push_back(std::move(s));
    return static_cast<int>(states_.size() - 1);
  }

  Graph& g_;
  const Seq2SeqView& view_;
  Tensor enc_out_;
  Tensor keys_proj_;
  std::vector<State> states_;
};

std::vector<int> strip_eos(std::vector<int> tokens) {
  if (!tokens.empty() && tokens.back() == Vocabulary::kEos) tokens.pop_back();
  return tokens;
}

std::vector<int> run_beam(Graph& g, const Seq2SeqView& view, Tensor enc_out,
                          const DecodeSettings& s) {
  NeuralStepper stepper(g, view, std::move(enc_out));
  auto nbest = beam_search(stepper, s.beam_size, s.max_len);
  if (nbest.empty()) return {};
  return strip_eos(nbest.front().tokens);
}

}  // namespace

std::vector<int> decode_asr(const ComponentGraph& cg, const Tensor& frames,
                            const DecodeSettings& s) {
  Graph g;
  g.set_grad_enabled(false);
  Seq2SeqView view = asr_view(cg);
  Tensor enc_out = nn::bilstm_encode(g, view.enc_layers, view.enc_cfg.pool_factors, frames);
  return run_beam(g, view, enc_out, s);
}

std::vector<int> decode_mt(const ComponentGraph& cg, const std::vector<int>& source_inner,
                           const DecodeSettings& s) {
  if (source_inner.empty()) throw std::invalid_argument("decode_mt: empty source");
  Graph g;
  g.set_grad_enabled(false);
  Seq2SeqView view = mt_view(cg);
  std::vector<int> src = source_inner;
  src.push_back(Vocabulary::kEos);
  Tensor enc_out = nn::bilstm_encode(g, view.enc_layers, view.enc_cfg.pool_factors,
                                     nn::embed(g, view.enc_embed, src));
  return run_beam(g, view, enc_out, s);
}

std::vector<int> decode_mt_soft(const ComponentGraph& cg, const Tensor& posterior_rows,
                                double gamma, BridgeMode mode, const DecodeSettings& s) {
  Graph g;
  g.set_grad_enabled(false);
  Seq2SeqView view = mt_view(cg);
  Tensor rows = bridge_forward(g, posterior_rows, gamma, mode, view.enc_embed);
  Tensor enc_out = nn::bilstm_encode(g, view.enc_layers, view.enc_cfg.pool_factors, rows);
  return run_beam(g, view, enc_out, s);
}

std::vector<int> decode_direct(const ComponentGraph& cg, const Tensor& frames,
                               const DecodeSettings& s) {
  Graph g;
  g.set_grad_enabled(false);
  DirectView v = direct_view(cg);
  Tensor enc_out = nn::bilstm_encode(g, v.seq.enc_layers, v.seq.enc_cfg.pool_factors, frames);
  Tensor adapted = g.add_rowvec(g.matmul_nt(enc_out, v.adapter_w), v.adapter_b);
  return run_beam(g, v.seq, adapted, s);
}

Tensor asr_posteriors_along(const ComponentGraph& cg, const Tensor& frames,
                            const std::vector<int>& transcript_inner) {
  Graph g;
  g.set_grad_enabled(false);
  ForwardOptions opt;
  opt.want_posteriors = true;
  ForwardResult res = asr_forward(g, cg, frames, frame_tokens(transcript_inner), opt);
  return res.posteriors;
}

TightDecodeResult decode_tight(const ComponentGraph& cg, const Tensor& frames,
                               const BridgeConfig& bridge, const DecodeSettings& s) {
  if (cg.kind != "tight" && cg.kind != "cascade")
    throw std::invalid_argument("decode_tight: expects a tight or cascade model");
  TightDecodeResult out;
  out.transcript = decode_asr(cg, frames, s);
  if (out.transcript.empty()) return out;

  const std::size_t vocab = static_cast<std::size_t>(source_vocab(cg).size());
  if (bridge.mode == BridgeMode::kOneHot) {
    // transcript one-hots (incl. the EOS row); identical to the vanilla
    // cascade's hard hand-over
    std::vector<int> src = out.transcript;
    src.push_back(Vocabulary::kEos);
    Tensor rows = Tensor::zeros({src.size(), vocab});
    auto rv = rows.values();
    for (std::size_t j = 0; j < src.size(); ++j) rv[j * vocab + static_cast<std::size_t>(src[j])] = 1;
    out.translation = decode_mt_soft(cg, rows, 1.0, BridgeMode::kOneHot, s);
  } else {
    Tensor posteriors = asr_posteriors_along(cg, frames, out.transcript);
    out.translation = decode_mt_soft(cg, posteriors, bridge.decode_gamma, BridgeMode::kSoft, s);
  }
  return out;
}

}  // namespace stc
