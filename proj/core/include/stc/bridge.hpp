#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stc/tensor.hpp"

namespace stc {

// J x |V_F| row-stochastic matrix of per-step source-word distributions.
struct PosteriorSequence {
  std::size_t vocab = 0;
  std::vector<std::vector<double>> rows;

  std::size_t length() const { return rows.size(); }
  // row sums within 1e-9, entries in [0,1]
  void validate() const;

  static PosteriorSequence from_tensor(const Tensor& rows);
  Tensor to_tensor() const;
};

enum class BridgeMode { kSoft, kOneHot };

struct BridgeConfig {
  double train_gamma = 1.0;
  double decode_gamma = 2.0;
  BridgeMode mode = BridgeMode::kSoft;
};

// shared row kernel: out[v] = p[v]^gamma / sum p^gamma, log-space internally;
// gamma==1 copies bit-exactly, gamma==0 requires full support and is uniform
void sharpen_row(std::span<const double> p, double gamma, std::span<double> out);

PosteriorSequence renormalize(const PosteriorSequence& dist, double gamma);

// argmax per row, ties broken by lowest token id
PosteriorSequence to_one_hot(const PosteriorSequence& dist);
std::size_t argmax_lowest(std::span<const double> row);

// Differentiable bridge: soft mode embeds the sharpened distributions into the
// MT embedding table; one_hot mode embeds hard argmax rows (gradient to the
// ASR side is cut by construction).
Tensor bridge_forward(Graph& g, const Tensor& dist_rows, double gamma, BridgeMode mode,
                      const Tensor& mt_embed_table);

}  // namespace stc
