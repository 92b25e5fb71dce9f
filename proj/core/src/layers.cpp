#include "stc/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace stc::nn {

Tensor embed(Graph& g, const Tensor& table, const std::vector<int>& tokens) {
  return g.embed_rows(table, tokens);
}

Tensor embed(Graph& g, const Tensor& table, const Tensor& distributions) {
  if (distributions.ndim() != 2 || distributions.dim(1) != table.dim(0))
    throw std::invalid_argument("embed: distribution width does not match vocabulary");
  auto dv = distributions.values();
  const std::size_t rows = distributions.dim(0), v = distributions.dim(1);
  for (std::size_t j = 0; j < rows; ++j) {
    real s = 0;
    for (std::size_t i = 0; i < v; ++i) s += dv[j * v + i];
    if (std::fabs(s - real(1)) > real(1e-6))
      throw std::invalid_argument("embed: distribution row not normalized");
  }
  return g.matmul(distributions, table);
}

std::pair<Tensor, Tensor> lstm_step(Graph& g, const LstmParams& p, const Tensor& x,
                                    const Tensor& h, const Tensor& c) {
  const std::size_t hd = static_cast<std::size_t>(p.hidden());
  if (x.numel() != p.w_x.dim(1) || h.numel() != hd || c.numel() != hd)
    throw std::invalid_argument("lstm_step: dimension mismatch");
  Tensor gates = g.add(g.add(g.matvec(p.w_x, x), g.matvec(p.w_h, h)), p.b);
  Tensor i = g.sigmoid(g.slice(gates, 0, hd));
  Tensor f = g.sigmoid(g.slice(gates, hd, hd));
  Tensor cand = g.tanh(g.slice(gates, 2 * hd, hd));
  Tensor o = g.sigmoid(g.slice(gates, 3 * hd, hd));
  Tensor c_next = g.add(g.mul(f, c), g.mul(i, cand));
  Tensor h_next = g.mul(o, g.tanh(c_next));
  return {h_next, c_next};
}

Tensor bilstm_layer(Graph& g, const LstmParams& fwd, const LstmParams& bwd,
                    const Tensor& input_rows) {
  if (input_rows.ndim() != 2 || input_rows.dim(0) == 0)
    throw std::invalid_argument("bilstm_layer: empty input");
  const std::size_t T = input_rows.dim(0);
  const std::size_t hd = static_cast<std::size_t>(fwd.hidden());
  std::vector<Tensor> fh(T), bh(T);
  Tensor h = Tensor::zeros({hd}), c = Tensor::zeros({hd});
  for (std::size_t t = 0; t < T; ++t) {
    std::tie(h, c) = lstm_step(g, fwd, g.row(input_rows, t), h, c);
    fh[t] = h;
  }
  h = Tensor::zeros({hd});
  c = Tensor::zeros({hd});
  for (std::size_t t = T; t-- > 0;) {
    std::tie(h, c) = lstm_step(g, bwd, g.row(input_rows, t), h, c);
    bh[t] = h;
  }
  std::vector<Tensor> rows(T);
  for (std::size_t t = 0; t < T; ++t) rows[t] = g.concat({fh[t], bh[t]});
  return g.stack_rows(rows);
}

Tensor bilstm_encode(Graph& g, const std::vector<std::pair<LstmParams, LstmParams>>& layers,
                     const std::vector<int>& pool_factors, const Tensor& input_rows) {
  if (layers.empty()) throw std::invalid_argument("bilstm_encode: no layers");
  Tensor x = input_rows;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = bilstm_layer(g, layers[l].first, layers[l].second, x);
    if (l < pool_factors.size() && pool_factors[l] > 1)
      x = g.max_pool_rows(x, static_cast<std::size_t>(pool_factors[l]));
  }
  return x;
}

Tensor attention_project_keys(Graph& g, const AttentionParams& p, const Tensor& keys) {
  return g.matmul_nt(keys, p.w_k);  // T x a
}

std::pair<Tensor, Tensor> additive_attention(Graph& g, const AttentionParams& p,
                                             const Tensor& query, const Tensor& keys,
                                             const Tensor& keys_proj) {
  if (keys.ndim() != 2 || keys.dim(0) == 0)
    throw std::invalid_argument("additive_attention: empty keys");
  Tensor scores = g.matvec(g.tanh(g.add_rowvec(keys_proj, g.matvec(p.w_q, query))), p.v);
  Tensor weights = g.softmax(scores, 0);
  Tensor context = g.matvec_t(keys, weights);
  return {context, weights};
}

Tensor label_smoothed_ce(Graph& g, const Tensor& logits, int target, real ratio) {
  if (ratio < 0 || ratio >= 1)
    throw std::invalid_argument("label_smoothed_ce: ratio must be in [0,1)");
  const std::size_t v = logits.numel();
  if (target < 0 || static_cast<std::size_t>(target) >= v)
    throw std::invalid_argument("label_smoothed_ce: target out of range");
  Tensor ls = g.log_softmax(logits, 0);
  Tensor loss = g.scale(g.pick(ls, static_cast<std::size_t>(target)), -(real(1) - ratio));
  if (ratio > 0) loss = g.sub(loss, g.scale(g.sum(ls), ratio / static_cast<real>(v)));
  return loss;
}

Tensor dropout(Graph& g, const Tensor& t, real rate, bool training, Rng& rng) {
  if (rate < 0 || rate >= 1) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (!training || rate == 0) return t;
  std::vector<real> mask(t.numel());
  const real keep_scale = real(1) / (real(1) - rate);
  for (auto& m : mask) m = rng.uniform() < rate ? real(0) : keep_scale;
  return g.mul_mask(t, std::move(mask));
}

Tensor feature_mask(const Tensor& frames, int num_time_masks, int num_feat_masks, int max_width,
                    Rng& rng) {
  if (frames.ndim() != 2) throw std::invalid_argument("feature_mask: expects T x d frames");
  const long T = static_cast<long>(frames.dim(0)), d = static_cast<long>(frames.dim(1));
  if (max_width > T || max_width > d)
    throw std::invalid_argument("feature_mask: max_width exceeds input size");
  Tensor out = frames.clone();
  auto ov = out.values();
  for (int m = 0; m < num_time_masks; ++m) {
    const long w = rng.uniform_int(1, max_width);
    const long start = rng.uniform_int(0, T - w);
    for (long t = start; t < start + w; ++t)
      for (long c = 0; c < d; ++c) ov[t * d + c] = 0;
  }
  for (int m = 0; m < num_feat_masks; ++m) {
    const long w = rng.uniform_int(1, max_width);
    const long start = rng.uniform_int(0, d - w);
    for (long t = 0; t < T; ++t)
      for (long c = start; c < start + w; ++c) ov[t * d + c] = 0;
  }
  return out;
}

Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  for (auto& x : t.values()) x = static_cast<real>(rng.uniform(-scale, scale));
  t.set_requires_grad(true);
  return t;
}

LstmParams init_lstm(int input_dim, int hidden, Rng& rng) {
  LstmParams p;
  p.w_x = init_weight({4 * static_cast<std::size_t>(hidden), static_cast<std::size_t>(input_dim)},
                      static_cast<std::size_t>(input_dim), rng);
  p.w_h = init_weight({4 * static_cast<std::size_t>(hidden), static_cast<std::size_t>(hidden)},
                      static_cast<std::size_t>(hidden), rng);
  p.b = Tensor::zeros({4 * static_cast<std::size_t>(hidden)});
  // forget gate bias at 1
  auto bv = p.b.values();
  for (int i = hidden; i < 2 * hidden; ++i) bv[static_cast<std::size_t>(i)] = 1;
  p.b.set_requires_grad(true);
  return p;
}

AttentionParams init_attention(int query_dim, int key_dim, int attention_dim, Rng& rng) {
  AttentionParams p;
  p.w_q = init_weight({static_cast<std::size_t>(attention_dim), static_cast<std::size_t>(query_dim)},
                      static_cast<std::size_t>(query_dim), rng);
  p.w_k = init_weight({static_cast<std::size_t>(attention_dim), static_cast<std::size_t>(key_dim)},
                      static_cast<std::size_t>(key_dim), rng);
  p.v = init_weight({static_cast<std::size_t>(attention_dim)},
                    static_cast<std::size_t>(attention_dim), rng);
  return p;
}

}  // namespace stc::nn
