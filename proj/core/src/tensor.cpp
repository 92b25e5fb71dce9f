#include "stc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace stc {

namespace {

std::atomic<std::uint64_t> g_graph_ids{1};

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool all_finite(std::span<const real> xs) {
  for (real x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::make(Shape shape) {
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->v.assign(shape_numel(impl->shape), real(0));
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape) { return make(std::move(shape)); }

Tensor Tensor::full(Shape shape, real value) {
  Tensor t = make(std::move(shape));
  std::fill(t.impl_->v.begin(), t.impl_->v.end(), value);
  return t;
}

Tensor Tensor::from(Shape shape, std::vector<real> values) {
  require(shape_numel(shape) == values.size(),
          "tensor data size does not match shape " + shape_str(shape));
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->v = std::move(values);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(real value) { return from({}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::numel() const { return impl_->v.size(); }
std::size_t Tensor::dim(std::size_t axis) const { return impl_->shape.at(axis); }
std::size_t Tensor::ndim() const { return impl_->shape.size(); }

std::span<real> Tensor::values() { return impl_->v; }
std::span<const real> Tensor::values() const { return impl_->v; }

real Tensor::item() const {
  require(numel() == 1, "item() on non-scalar tensor " + shape_str(shape()));
  return impl_->v[0];
}

real Tensor::at(std::size_t i) const { return impl_->v.at(i); }

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool enable) {
  impl_->requires_grad = enable;
  return *this;
}

bool Tensor::has_grad() const { return !impl_->g.empty(); }

std::span<real> Tensor::grad() {
  if (impl_->g.empty()) impl_->g.assign(impl_->v.size(), real(0));
  return impl_->g;
}

std::span<const real> Tensor::grad() const {
  require(!impl_->g.empty(), "tensor has no gradient buffer");
  return impl_->g;
}

void Tensor::zero_grad() {
  if (!impl_->g.empty()) std::fill(impl_->g.begin(), impl_->g.end(), real(0));
}

Tensor Tensor::clone() const {
  Tensor t = from(impl_->shape, impl_->v);
  t.impl_->requires_grad = impl_->requires_grad;
  return t;
}

Tensor Tensor::detached() const {
  auto impl = std::make_shared<Impl>(*impl_);
  impl->requires_grad = false;
  impl->g.clear();
  impl->node = -1;
  impl->graph_id = 0;
  return Tensor(std::move(impl));
}

// ---------------------------------------------------------------------------
// Graph

Graph::Graph() : id_(g_graph_ids.fetch_add(1)) {}

void Graph::clear() {
  nodes_.clear();
  scratch_.clear();
  ++epoch_;
}

int Graph::node_of(const Tensor& t) {
  auto& impl = *t.impl_;
  if (impl.graph_id == id_ && impl.epoch == epoch_) return impl.node;
  impl.graph_id = id_;
  impl.epoch = epoch_;
  impl.node = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{t, {}, nullptr});
  return impl.node;
}

Tensor Graph::record(Tensor out, std::vector<Tensor> inputs, std::function<void(Graph&)> bw) {
  if (!grad_enabled_) return out;
  bool needs = false;
  for (const Tensor& in : inputs) needs = needs || in.requires_grad();
  out.set_requires_grad(needs);
  for (const Tensor& in : inputs) node_of(in);
  auto& impl = *out.impl_;
  impl.graph_id = id_;
  impl.epoch = epoch_;
  impl.node = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{out, std::move(inputs), needs ? std::move(bw) : nullptr});
  return out;
}

std::vector<real>& Graph::gbuf(const Tensor& t) {
  const auto& impl = *t.impl_;
  require(impl.graph_id == id_ && impl.epoch == epoch_, "tensor does not belong to this graph");
  auto& buf = scratch_[static_cast<std::size_t>(impl.node)];
  if (buf.empty()) buf.assign(impl.v.size(), real(0));
  return buf;
}

const std::vector<real>* Graph::gbuf_if_any(const Tensor& t) const {
  const auto& impl = *t.impl_;
  if (impl.graph_id != id_ || impl.epoch != epoch_) return nullptr;
  const auto& buf = scratch_[static_cast<std::size_t>(impl.node)];
  return buf.empty() ? nullptr : &buf;
}

void Graph::backward(const Tensor& root) {
  require(root.defined() && root.numel() == 1, "backward root must be a scalar");
  require(root.impl_->graph_id == id_ && root.impl_->epoch == epoch_,
          "backward root is not part of this graph");
  scratch_.assign(nodes_.size(), {});
  gbuf(root)[0] = real(1);
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    if (scratch_[i].empty() || !node.bw) continue;
    node.bw(*this);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Tensor& t = nodes_[i].out;
    if (!t.requires_grad() || scratch_[i].empty()) continue;
    auto g = t.grad();
    const auto& s = scratch_[i];
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += s[k];
  }
  scratch_.clear();
}

// ---------------------------------------------------------------------------
// elementwise

namespace {
enum class BinKind { kElem, kScalarLeft, kScalarRight };

BinKind bin_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return BinKind::kElem;
  if (a.numel() == 1 && a.ndim() == 0) return BinKind::kScalarLeft;
  if (b.numel() == 1 && b.ndim() == 0) return BinKind::kScalarRight;
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}
}  // namespace

Tensor Graph::add(const Tensor& a, const Tensor& b) {
  BinKind k = bin_kind(a, b, "add");
  Tensor out = Tensor::zeros(k == BinKind::kScalarRight || k == BinKind::kElem ? a.shape() : b.shape());
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i)
    ov[i] = (k == BinKind::kScalarLeft ? av[0] : av[i]) + (k == BinKind::kScalarRight ? bv[0] : bv[i]);
  return record(out, {a, b}, [a, b, out, k](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto& gb = g.gbuf(b);
    for (std::size_t i = 0; i < og.size(); ++i) {
      ga[k == BinKind::kScalarLeft ? 0 : i] += og[i];
      gb[k == BinKind::kScalarRight ? 0 : i] += og[i];
    }
  });
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
  BinKind k = bin_kind(a, b, "sub");
  Tensor out = Tensor::zeros(k == BinKind::kScalarRight || k == BinKind::kElem ? a.shape() : b.shape());
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i)
    ov[i] = (k == BinKind::kScalarLeft ? av[0] : av[i]) - (k == BinKind::kScalarRight ? bv[0] : bv[i]);
  return record(out, {a, b}, [a, b, out, k](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto& gb = g.gbuf(b);
    for (std::size_t i = 0; i < og.size(); ++i) {
      ga[k == BinKind::kScalarLeft ? 0 : i] += og[i];
      gb[k == BinKind::kScalarRight ? 0 : i] -= og[i];
    }
  });
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
  BinKind k = bin_kind(a, b, "mul");
  Tensor out = Tensor::zeros(k == BinKind::kScalarRight || k == BinKind::kElem ? a.shape() : b.shape());
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i)
    ov[i] = (k == BinKind::kScalarLeft ? av[0] : av[i]) * (k == BinKind::kScalarRight ? bv[0] : bv[i]);
  return record(out, {a, b}, [a, b, out, k](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto& gb = g.gbuf(b);
    auto av = a.values(), bv = b.values();
    for (std::size_t i = 0; i < og.size(); ++i) {
      ga[k == BinKind::kScalarLeft ? 0 : i] += og[i] * (k == BinKind::kScalarRight ? bv[0] : bv[i]);
      gb[k == BinKind::kScalarRight ? 0 : i] += og[i] * (k == BinKind::kScalarLeft ? av[0] : av[i]);
    }
  });
}

Tensor Graph::scale(const Tensor& a, real s) {
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * s;
  return record(out, {a}, [a, out, s](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * s;
  });
}

Tensor Graph::pow(const Tensor& a, real exponent) {
  const bool integral_exp = exponent == std::floor(exponent);
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    if (av[i] < 0 && !integral_exp)
      throw std::invalid_argument("pow: negative base with fractional exponent");
    ov[i] = std::pow(av[i], exponent);
  }
  return record(out, {a}, [a, out, exponent](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto av = a.values();
    for (std::size_t i = 0; i < og.size(); ++i) {
      real d;
      if (exponent == real(0)) {
        d = 0;
      } else if (av[i] == real(0)) {
        // convention: d/dt t^e = 0 at t=0 for e>1; e==1 is the identity
        d = exponent == real(1) ? real(1) : real(0);
      } else {
        d = exponent * std::pow(av[i], exponent - real(1));
      }
      ga[i] += og[i] * d;
    }
  });
}

Tensor Graph::exp(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::exp(av[i]);
  return record(out, {a}, [a, out](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto ov = out.values();
    for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * ov[i];
  });
}

Tensor Graph::log(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    require(av[i] > 0, "log of non-positive value");
    ov[i] = std::log(av[i]);
  }
  return record(out, {a}, [a, out](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto av = a.values();
    for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] / av[i];
  });
}

Tensor Graph::tanh(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(av[i]);
  return record(out, {a}, [a, out](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto ov = out.values();
    for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * (real(1) - ov[i] * ov[i]);
  });
}

Tensor Graph::sigmoid(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = real(1) / (real(1) + std::exp(-av[i]));
  return record(out, {a}, [a, out](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto ov = out.values();
    for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * ov[i] * (real(1) - ov[i]);
  });
}

Tensor Graph::mul_mask(const Tensor& a, std::vector<real> mask) {
  require(mask.size() == a.numel(), "mul_mask: mask size mismatch");
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * mask[i];
  auto shared = std::make_shared<std::vector<real>>(std::move(mask));
  return record(out, {a}, [a, out, shared](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i] * (*shared)[i];
  });
}

// ---------------------------------------------------------------------------
// reductions

Tensor Graph::sum(const Tensor& a) {
  real s = 0;
  for (real x : a.values()) s += x;
  Tensor out = Tensor::scalar(s);
  return record(out, {a}, [a, out](Graph& g) {
    const real og = g.gbuf(out)[0];
    auto& ga = g.gbuf(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og;
  });
}

Tensor Graph::dot(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "dot: shape mismatch");
  real s = 0;
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  Tensor out = Tensor::scalar(s);
  return record(out, {a, b}, [a, b, out](Graph& g) {
    const real og = g.gbuf(out)[0];
    auto& ga = g.gbuf(a);
    auto& gb = g.gbuf(b);
    auto av = a.values(), bv = b.values();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] += og * bv[i];
      gb[i] += og * av[i];
    }
  });
}

// ---------------------------------------------------------------------------
// shape surgery

Tensor Graph::reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(), "reshape: element count mismatch");
  Tensor out = Tensor::from(std::move(shape), {a.values().begin(), a.values().end()});
  return record(out, {a}, [a, out](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    for (std::size_t i = 0; i < og.size(); ++i) ga[i] += og[i];
  });
}

Tensor Graph::concat(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat: empty input");
  std::size_t n = 0;
  for (const Tensor& p : parts) {
    require(p.ndim() <= 1, "concat: expects vectors or scalars");
    n += p.numel();
  }
  Tensor out = Tensor::zeros({n});
  auto ov = out.values();
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    auto pv = p.values();
    std::copy(pv.begin(), pv.end(), ov.begin() + off);
    off += pv.size();
  }
  return record(out, parts, [parts, out](Graph& g) {
    const auto& og = g.gbuf(out);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      auto& gp = g.gbuf(p);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += og[off + i];
      off += gp.size();
    }
  });
}

Tensor Graph::stack_rows(const std::vector<Tensor>& rows) {
  require(!rows.empty(), "stack_rows: empty input");
  const std::size_t d = rows[0].numel();
  for (const Tensor& r : rows) {
    require(r.ndim() == 1 && r.numel() == d, "stack_rows: inconsistent row size");
  }
  Tensor out = Tensor::zeros({rows.size(), d});
  auto ov = out.values();
  for (std::size_t j = 0; j < rows.size(); ++j) {
    auto rv = rows[j].values();
    std::copy(rv.begin(), rv.end(), ov.begin() + j * d);
  }
  return record(out, rows, [rows, out, d](Graph& g) {
    const auto& og = g.gbuf(out);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      auto& gr = g.gbuf(rows[j]);
      for (std::size_t i = 0; i < d; ++i) gr[i] += og[j * d + i];
    }
  });
}

Tensor Graph::row(const Tensor& m, std::size_t r) {
  require(m.ndim() == 2, "row: expects a matrix");
  const std::size_t cols = m.dim(1);
  require(r < m.dim(0), "row: index out of range");
  auto mv = m.values();
  Tensor out = Tensor::from({cols}, {mv.begin() + r * cols, mv.begin() + (r + 1) * cols});
  return record(out, {m}, [m, out, r, cols](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& gm = g.gbuf(m);
    for (std::size_t i = 0; i < cols; ++i) gm[r * cols + i] += og[i];
  });
}

Tensor Graph::slice(const Tensor& v, std::size_t offset, std::size_t len) {
  require(v.ndim() == 1 && offset + len <= v.numel(), "slice: out of range");
  auto vv = v.values();
  Tensor out = Tensor::from({len}, {vv.begin() + offset, vv.begin() + offset + len});
  return record(out, {v}, [v, out, offset, len](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& gv = g.gbuf(v);
    for (std::size_t i = 0; i < len; ++i) gv[offset + i] += og[i];
  });
}

// ---------------------------------------------------------------------------
// linear algebra

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const real aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) ov[i * n + j] += aip * bv[p * n + j];
    }
  return record(out, {a, b}, [a, b, out, m, k, n](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto& gb = g.gbuf(b);
    auto av = a.values(), bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        real acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc += og[i * n + j] * bv[p * n + j];
        ga[i * k + p] += acc;
      }
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) {
        const real aip = av[i * k + p];
        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * og[i * n + j];
      }
  });
}

Tensor Graph::matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
          "matmul_nt: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor out = Tensor::zeros({m, n});
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      real acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += av[i * k + p] * bv[j * k + p];
      ov[i * n + j] = acc;
    }
  return record(out, {a, b}, [a, b, out, m, k, n](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto& gb = g.gbuf(b);
    auto av = a.values(), bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const real o = og[i * n + j];
        if (o == real(0)) continue;
        for (std::size_t p = 0; p < k; ++p) {
          ga[i * k + p] += o * bv[j * k + p];
          gb[j * k + p] += o * av[i * k + p];
        }
      }
  });
}

Tensor Graph::matvec(const Tensor& m, const Tensor& v) {
  require(m.ndim() == 2 && v.ndim() == 1 && m.dim(1) == v.numel(),
          "matvec: incompatible shapes " + shape_str(m.shape()) + " x " + shape_str(v.shape()));
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out = Tensor::zeros({rows});
  auto mv = m.values(), vv = v.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < rows; ++i) {
    real acc = 0;
    for (std::size_t j = 0; j < cols; ++j) acc += mv[i * cols + j] * vv[j];
    ov[i] = acc;
  }
  return record(out, {m, v}, [m, v, out, rows, cols](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& gm = g.gbuf(m);
    auto& gv = g.gbuf(v);
    auto mv = m.values(), vv = v.values();
    for (std::size_t i = 0; i < rows; ++i) {
      const real o = og[i];
      if (o == real(0)) continue;
      for (std::size_t j = 0; j < cols; ++j) {
        gm[i * cols + j] += o * vv[j];
        gv[j] += o * mv[i * cols + j];
      }
    }
  });
}

Tensor Graph::matvec_t(const Tensor& m, const Tensor& v) {
  require(m.ndim() == 2 && v.ndim() == 1 && m.dim(0) == v.numel(),
          "matvec_t: incompatible shapes " + shape_str(m.shape()) + "^T x " + shape_str(v.shape()));
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out = Tensor::zeros({cols});
  auto mv = m.values(), vv = v.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < rows; ++i) {
    const real vi = vv[i];
    for (std::size_t j = 0; j < cols; ++j) ov[j] += vi * mv[i * cols + j];
  }
  return record(out, {m, v}, [m, v, out, rows, cols](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& gm = g.gbuf(m);
    auto& gv = g.gbuf(v);
    auto mv = m.values(), vv = v.values();
    for (std::size_t i = 0; i < rows; ++i) {
      real acc = 0;
      for (std::size_t j = 0; j < cols; ++j) {
        gm[i * cols + j] += vv[i] * og[j];
        acc += mv[i * cols + j] * og[j];
      }
      gv[i] += acc;
    }
  });
}

Tensor Graph::add_rowvec(const Tensor& m, const Tensor& v) {
  require(m.ndim() == 2 && v.ndim() == 1 && m.dim(1) == v.numel(), "add_rowvec: shape mismatch");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor out = Tensor::zeros({rows, cols});
  auto mv = m.values(), vv = v.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) ov[i * cols + j] = mv[i * cols + j] + vv[j];
  return record(out, {m, v}, [m, v, out, rows, cols](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& gm = g.gbuf(m);
    auto& gv = g.gbuf(v);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        gm[i * cols + j] += og[i * cols + j];
        gv[j] += og[i * cols + j];
      }
  });
}

// ---------------------------------------------------------------------------
// nn primitives

namespace {
// rows/cols view of a 1-d or 2-d tensor along `axis`
struct AxisView {
  std::size_t count;   // number of slices
  std::size_t len;     // slice length
  std::size_t stride;  // stride between elements of a slice
  std::size_t pitch;   // stride between slices
};

AxisView axis_view(const Tensor& t, int axis, const char* op) {
  if (t.ndim() == 1) {
    if (axis != 0) throw std::invalid_argument(std::string(op) + ": axis out of range");
    return {1, t.numel(), 1, 0};
  }
  if (t.ndim() == 2) {
    const std::size_t r = t.dim(0), c = t.dim(1);
    if (axis == 1) return {r, c, 1, c};   // along each row
    if (axis == 0) return {c, r, c, 1};   // along each column
    throw std::invalid_argument(std::string(op) + ": axis out of range");
  }
  throw std::invalid_argument(std::string(op) + ": expects 1-d or 2-d tensor");
}
}  // namespace

Tensor Graph::softmax(const Tensor& a, int axis) {
  if (!all_finite(a.values())) throw std::invalid_argument("non-finite logits");
  AxisView view = axis_view(a, axis, "softmax");
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t s = 0; s < view.count; ++s) {
    const std::size_t base = s * view.pitch;
    real mx = -std::numeric_limits<real>::infinity();
    for (std::size_t i = 0; i < view.len; ++i) mx = std::max(mx, av[base + i * view.stride]);
    real z = 0;
    for (std::size_t i = 0; i < view.len; ++i) {
      const std::size_t idx = base + i * view.stride;
      ov[idx] = std::exp(av[idx] - mx);
      z += ov[idx];
    }
    for (std::size_t i = 0; i < view.len; ++i) ov[base + i * view.stride] /= z;
  }
  return record(out, {a}, [a, out, view](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto ov = out.values();
    for (std::size_t s = 0; s < view.count; ++s) {
      const std::size_t base = s * view.pitch;
      real inner = 0;
      for (std::size_t i = 0; i < view.len; ++i) {
        const std::size_t idx = base + i * view.stride;
        inner += og[idx] * ov[idx];
      }
      for (std::size_t i = 0; i < view.len; ++i) {
        const std::size_t idx = base + i * view.stride;
        ga[idx] += ov[idx] * (og[idx] - inner);
      }
    }
  });
}

Tensor Graph::log_softmax(const Tensor& a, int axis) {
  if (!all_finite(a.values())) throw std::invalid_argument("non-finite logits");
  AxisView view = axis_view(a, axis, "log_softmax");
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t s = 0; s < view.count; ++s) {
    const std::size_t base = s * view.pitch;
    real mx = -std::numeric_limits<real>::infinity();
    for (std::size_t i = 0; i < view.len; ++i) mx = std::max(mx, av[base + i * view.stride]);
    real z = 0;
    for (std::size_t i = 0; i < view.len; ++i) z += std::exp(av[base + i * view.stride] - mx);
    const real lz = mx + std::log(z);
    for (std::size_t i = 0; i < view.len; ++i) {
      const std::size_t idx = base + i * view.stride;
      ov[idx] = av[idx] - lz;
    }
  }
  return record(out, {a}, [a, out, view](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& ga = g.gbuf(a);
    auto ov = out.values();
    for (std::size_t s = 0; s < view.count; ++s) {
      const std::size_t base = s * view.pitch;
      real gsum = 0;
      for (std::size_t i = 0; i < view.len; ++i) gsum += og[base + i * view.stride];
      for (std::size_t i = 0; i < view.len; ++i) {
        const std::size_t idx = base + i * view.stride;
        ga[idx] += og[idx] - std::exp(ov[idx]) * gsum;
      }
    }
  });
}

Tensor Graph::pick(const Tensor& v, std::size_t index) {
  require(v.ndim() == 1 && index < v.numel(), "pick: index out of range");
  Tensor out = Tensor::scalar(v.values()[index]);
  return record(out, {v}, [v, out, index](Graph& g) {
    const real og = g.gbuf(out)[0];
    g.gbuf(v)[index] += og;
  });
}

Tensor Graph::embed_rows(const Tensor& table, const std::vector<int>& ids) {
  require(table.ndim() == 2, "embed_rows: table must be 2-d");
  const std::size_t vocab = table.dim(0), d = table.dim(1);
  for (int id : ids)
    require(id >= 0 && static_cast<std::size_t>(id) < vocab, "embed_rows: token id out of range");
  Tensor out = Tensor::zeros({ids.size(), d});
  auto tv = table.values();
  auto ov = out.values();
  for (std::size_t j = 0; j < ids.size(); ++j)
    std::copy(tv.begin() + ids[j] * d, tv.begin() + (ids[j] + 1) * d, ov.begin() + j * d);
  return record(out, {table}, [table, out, ids, d](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& gt = g.gbuf(table);
    for (std::size_t j = 0; j < ids.size(); ++j)
      for (std::size_t i = 0; i < d; ++i) gt[ids[j] * d + i] += og[j * d + i];
  });
}

Tensor Graph::max_pool_rows(const Tensor& m, std::size_t factor) {
  require(m.ndim() == 2, "max_pool_rows: expects a matrix");
  require(factor >= 1, "max_pool_rows: factor must be >= 1");
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  require(rows >= 1, "max_pool_rows: empty input");
  const std::size_t out_rows = (rows + factor - 1) / factor;
  Tensor out = Tensor::zeros({out_rows, cols});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out_rows * cols);
  auto mv = m.values();
  auto ov = out.values();
  for (std::size_t t = 0; t < out_rows; ++t) {
    for (std::size_t c = 0; c < cols; ++c) {
      // windows past the end are right-padded by the last row
      std::size_t best = std::min(t * factor, rows - 1);
      real bv = mv[best * cols + c];
      for (std::size_t k = 1; k < factor; ++k) {
        const std::size_t r = std::min(t * factor + k, rows - 1);
        if (mv[r * cols + c] > bv) {
          bv = mv[r * cols + c];
          best = r;
        }
      }
      ov[t * cols + c] = bv;
      (*argmax)[t * cols + c] = best;
    }
  }
  return record(out, {m}, [m, out, argmax, cols](Graph& g) {
    const auto& og = g.gbuf(out);
    auto& gm = g.gbuf(m);
    for (std::size_t i = 0; i < og.size(); ++i)
      gm[(*argmax)[i] * cols + (i % cols)] += og[i];
  });
}

Tensor Graph::sharpen_rows(const Tensor& rows, real gamma) {
  require(rows.ndim() == 2, "sharpen_rows: expects a matrix");
  require(gamma >= 0 && std::isfinite(gamma), "sharpen_rows: gamma must be finite and >= 0");
  const std::size_t n = rows.dim(0), v = rows.dim(1);
  auto pv = rows.values();
  if (gamma == real(1)) {
    // bit-level identity
    Tensor out = Tensor::from(rows.shape(), {pv.begin(), pv.end()});
    return record(out, {rows}, [rows, out](Graph& g) {
      const auto& og = g.gbuf(out);
      auto& gr = g.gbuf(rows);
      for (std::size_t i = 0; i < og.size(); ++i) gr[i] += og[i];
    });
  }
  Tensor out = Tensor::zeros(rows.shape());
  auto ov = out.values();
  for (std::size_t j = 0; j < n; ++j) {
    const real* p = &pv[j * v];
    real* o = &ov[j * v];
    if (gamma == real(0)) {
      for (std::size_t i = 0; i < v; ++i)
        if (p[i] <= 0) throw std::invalid_argument("degenerate row");
      for (std::size_t i = 0; i < v; ++i) o[i] = real(1) / real(v);
      continue;
    }
    // log-space: exp(gamma*log p - max) / sum
    real mx = -std::numeric_limits<real>::infinity();
    for (std::size_t i = 0; i < v; ++i) {
      const real l = p[i] > 0 ? gamma * std::log(p[i]) : -std::numeric_limits<real>::infinity();
      o[i] = l;
      mx = std::max(mx, l);
    }
    if (!std::isfinite(mx)) throw std::invalid_argument("degenerate row");
    real z = 0;
    for (std::size_t i = 0; i < v; ++i) {
      o[i] = std::exp(o[i] - mx);
      z += o[i];
    }
    if (z <= 0) throw std::invalid_argument("degenerate row");
    for (std::size_t i = 0; i < v; ++i) o[i] /= z;
  }
  return record(out, {rows}, [rows, out, gamma, n, v](Graph& g) {
    if (gamma == real(0)) return;  // uniform output, zero gradient
    const auto& og = g.gbuf(out);
    auto& gr = g.gbuf(rows);
    auto pv = rows.values();
    auto ov = out.values();
    for (std::size_t j = 0; j < n; ++j) {
      const real* p = &pv[j * v];
      const real* o = &ov[j * v];
      const real* go = &og[j * v];
      real inner = 0;
      for (std::size_t i = 0; i < v; ++i) inner += go[i] * o[i];
      for (std::size_t i = 0; i < v; ++i) {
        if (p[i] <= 0) continue;
        gr[j * v + i] += gamma * o[i] / p[i] * (go[i] - inner);
      }
    }
  });
}

}  // namespace stc
