#include "stc/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stc/layers.hpp"

namespace stc {

void PosteriorSequence::validate() const {
  for (const auto& row : rows) {
    if (row.size() != vocab) throw std::invalid_argument("posterior row width mismatch");
    double s = 0;
    for (double p : row) {
      if (p < 0.0 || p > 1.0) throw std::invalid_argument("posterior entry outside [0,1]");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw std::invalid_argument("posterior row not normalized");
  }
}

PosteriorSequence PosteriorSequence::from_tensor(const Tensor& t) {
  if (t.ndim() != 2) throw std::invalid_argument("posterior tensor must be 2-d");
  PosteriorSequence ps;
  ps.vocab = t.dim(1);
  ps.rows.resize(t.dim(0));
  auto tv = t.values();
  for (std::size_t j = 0; j < t.dim(0); ++j)
    ps.rows[j].assign(tv.begin() + j * ps.vocab, tv.begin() + (j + 1) * ps.vocab);
  return ps;
}

Tensor PosteriorSequence::to_tensor() const {
  std::vector<real> flat;
  flat.reserve(rows.size() * vocab);
  for (const auto& row : rows)
    for (double p : row) flat.push_back(static_cast<real>(p));
  return Tensor::from({rows.size(), vocab}, std::move(flat));
}

void sharpen_row(std::span<const double> p, double gamma, std::span<double> out) {
  if (gamma < 0 || !std::isfinite(gamma))
    throw std::invalid_argument("gamma must be finite and >= 0");
  const std::size_t v = p.size();
  if (gamma == 1.0) {
    std::copy(p.begin(), p.end(), out.begin());
    return;
  }
  if (gamma == 0.0) {
    for (double x : p)
      if (x <= 0.0) throw std::invalid_argument("degenerate row");
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(v));
    return;
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v; ++i) {
    out[i] = p[i] > 0 ? gamma * std::log(p[i]) : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, out[i]);
  }
  if (!std::isfinite(mx)) throw std::invalid_argument("degenerate row");
  double z = 0;
  for (std::size_t i = 0; i < v; ++i) {
    out[i] = std::exp(out[i] - mx);
    z += out[i];
  }
  if (z <= 0) throw std::invalid_argument("degenerate row");
  for (std::size_t i = 0; i < v; ++i) out[i] /= z;
}

PosteriorSequence renormalize(const PosteriorSequence& dist, double gamma) {
  dist.validate();
  PosteriorSequence out;
  out.vocab = dist.vocab;
  out.rows.resize(dist.rows.size());
  for (std::size_t j = 0; j < dist.rows.size(); ++j) {
    out.rows[j].resize(dist.vocab);
    sharpen_row(dist.rows[j], gamma, out.rows[j]);
  }
  return out;
}

std::size_t argmax_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

PosteriorSequence to_one_hot(const PosteriorSequence& dist) {
  dist.validate();
  PosteriorSequence out;
  out.vocab = dist.vocab;
  out.rows.resize(dist.rows.size());
  for (std::size_t j = 0; j < dist.rows.size(); ++j) {
    out.rows[j].assign(dist.vocab, 0.0);
    out.rows[j][argmax_lowest(dist.rows[j])] = 1.0;
  }
  return out;
}

Tensor bridge_forward(Graph& g, const Tensor& dist_rows, double gamma, BridgeMode mode,
                      const Tensor& mt_embed_table) {
  if (dist_rows.ndim() != 2 || mt_embed_table.ndim() != 2 ||
      dist_rows.dim(1) != mt_embed_table.dim(0))
    throw std::invalid_argument("bridge vocabulary mismatch");
  if (mode == BridgeMode::kOneHot) {
    const std::size_t v = dist_rows.dim(1);
    auto dv = dist_rows.values();
    std::vector<int> ids(dist_rows.dim(0));
    for (std::size_t j = 0; j < ids.size(); ++j) {
      std::span<const real> row{dv.data() + j * v, v};
      std::size_t best = 0;
      for (std::size_t i = 1; i < v; ++i)
        if (row[i] > row[best]) best = i;
      ids[j] = static_cast<int>(best);
    }
    return g.embed_rows(mt_embed_table, ids);
  }
  return g.matmul(g.sharpen_rows(dist_rows, static_cast<real>(gamma)), mt_embed_table);
}

}  // namespace stc
