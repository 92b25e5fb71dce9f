#pragma once

#include <utility>
#include <vector>

#include "stc/rng.hpp"
#include "stc/tensor.hpp"

namespace stc {

struct EncoderConfig {
  int num_layers = 2;
  int hidden = 64;
  std::vector<int> pool_factors = {2};  // applied after layers 1,2,...
  int embed_dim = 32;                   // text encoder only; 0 for feature input
  int input_dim = 16;                   // feature dim, or embed_dim for text
};

struct DecoderConfig {
  int hidden = 64;
  int embed_dim = 32;
  int attention_dim = 64;
};

namespace nn {

struct LstmParams {
  Tensor w_x;  // 4h x d, gate order i,f,g,o
  Tensor w_h;  // 4h x h
  Tensor b;    // 4h
  int hidden() const { return static_cast<int>(w_h.dim(1)); }
};

struct AttentionParams {
  Tensor w_q;  // a x h
  Tensor w_k;  // a x k
  Tensor v;    // a
};

// expected embedding: hard token ids -> row lookup
Tensor embed(Graph& g, const Tensor& table, const std::vector<int>& tokens);
// distributions (J x |V|, row-stochastic within 1e-6) -> matrix product
Tensor embed(Graph& g, const Tensor& table, const Tensor& distributions);

std::pair<Tensor, Tensor> lstm_step(Graph& g, const LstmParams& p, const Tensor& x,
                                    const Tensor& h, const Tensor& c);

// One bidirectional layer: forward and backward passes concatenated per step.
Tensor bilstm_layer(Graph& g, const LstmParams& fwd, const LstmParams& bwd, const Tensor& input_rows);

// Full encoder stack with max-pool time reduction after layers 1,2,...
// Returns T' x 2h. layers[i] = {fwd, bwd}.
Tensor bilstm_encode(Graph& g, const std::vector<std::pair<LstmParams, LstmParams>>& layers,
                     const std::vector<int>& pool_factors, const Tensor& input_rows);

// returns (context, weights); keys double as values
std::pair<Tensor, Tensor> additive_attention(Graph& g, const AttentionParams& p,
                                             const Tensor& query, const Tensor& keys,
                                             const Tensor& keys_proj);
Tensor attention_project_keys(Graph& g, const AttentionParams& p, const Tensor& keys);

Tensor label_smoothed_ce(Graph& g, const Tensor& logits, int target, real ratio);

Tensor dropout(Graph& g, const Tensor& t, real rate, bool training, Rng& rng);

// zero num_time contiguous row blocks and num_feat column blocks, widths drawn
// uniformly in [1, max_width]
Tensor feature_mask(const Tensor& frames, int num_time_masks, int num_feat_masks, int max_width,
                    Rng& rng);

// uniform init scaled by fan-in
Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng);
LstmParams init_lstm(int input_dim, int hidden, Rng& rng);
AttentionParams init_attention(int query_dim, int key_dim, int attention_dim, Rng& rng);

}  // namespace nn
}  // namespace stc
