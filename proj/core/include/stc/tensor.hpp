#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace stc {

#ifdef STC_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Graph;

// Dense row-major array with an optional gradient buffer. Value semantics are
// shared-handle: copies alias the same storage, matching how parameters are
// threaded through models and optimizers.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, real value);
  static Tensor from(Shape shape, std::vector<real> values);
  static Tensor scalar(real value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t ndim() const;

  std::span<real> values();
  std::span<const real> values() const;
  real item() const;
  real at(std::size_t i) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool enable);
  bool has_grad() const;
  std::span<real> grad();
  std::span<const real> grad() const;
  void zero_grad();

  // Deep copy of the values; no tape linkage, no grad buffer.
  Tensor clone() const;
  // Same storage, but excluded from gradient tracking.
  Tensor detached() const;

 private:
  friend class Graph;
  struct Impl {
    Shape shape;
    std::vector<real> v;
    std::vector<real> g;          // persistent gradient, empty until backward
    bool requires_grad = false;
    std::uint64_t graph_id = 0;   // tape bookkeeping, see Graph::node_of
    std::uint64_t epoch = 0;
    int node = -1;
  };
  std::shared_ptr<Impl> impl_;
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  static Tensor make(Shape shape);
};

// Dynamic tape rebuilt per forward pass. Nodes are stored in creation order,
// which is already a topological order; backward walks the tape in reverse.
// A Graph and its tensors are confined to one thread; parameter tensors may
// be shared read-only across graphs between optimizer steps.
class Graph {
 public:
  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void clear();
  std::size_t num_nodes() const { return nodes_.size(); }
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  // elementwise (matching shapes, or one scalar operand)
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, real s);
  Tensor pow(const Tensor& a, real exponent);
  Tensor exp(const Tensor& a);
  Tensor log(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor sigmoid(const Tensor& a);
  Tensor mul_mask(const Tensor& a, std::vector<real> mask);

  // reductions
  Tensor sum(const Tensor& a);
  Tensor dot(const Tensor& a, const Tensor& b);

  // shape surgery (no broadcasting beyond the scalar cases above)
  Tensor reshape(const Tensor& a, Shape shape);
  Tensor concat(const std::vector<Tensor>& parts);      // 1-d
  Tensor stack_rows(const std::vector<Tensor>& rows);   // J vectors -> J x d
  Tensor row(const Tensor& m, std::size_t r);
  Tensor slice(const Tensor& v, std::size_t offset, std::size_t len);

  // linear algebra
  Tensor matmul(const Tensor& a, const Tensor& b);      // (m,k)x(k,n)
  Tensor matmul_nt(const Tensor& a, const Tensor& b);   // (m,k)x(n,k)^T
  Tensor matvec(const Tensor& m, const Tensor& v);      // (m,n)·(n)
  Tensor matvec_t(const Tensor& m, const Tensor& v);    // (m,n)^T·(m)
  Tensor add_rowvec(const Tensor& m, const Tensor& v);  // every row += v

  // nn primitives
  Tensor softmax(const Tensor& a, int axis);
  Tensor log_softmax(const Tensor& a, int axis);
  Tensor pick(const Tensor& v, std::size_t index);      // scalar v[index]
  Tensor embed_rows(const Tensor& table, const std::vector<int>& ids);
  Tensor max_pool_rows(const Tensor& m, std::size_t factor);
  // Eq-style posterior sharpening: out[j][v] = p[j][v]^gamma / sum_v' p[j][v']^gamma,
  // computed in log-space. gamma == 1 is a bit-level identity.
  Tensor sharpen_rows(const Tensor& rows, real gamma);

  // Accumulates dRoot/dTensor into every requires_grad tensor reachable from
  // root. Repeated calls accumulate unless grads are zeroed first.
  void backward(const Tensor& root);

 private:
  struct Node {
    Tensor out;
    std::vector<Tensor> inputs;
    std::function<void(Graph&)> bw;  // adds into input scratch grads
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<real>> scratch_;
  std::uint64_t id_;
  std::uint64_t epoch_ = 1;
  bool grad_enabled_ = true;

  int node_of(const Tensor& t);
  Tensor record(Tensor out, std::vector<Tensor> inputs, std::function<void(Graph&)> bw);
  std::vector<real>& gbuf(const Tensor& t);
  const std::vector<real>* gbuf_if_any(const Tensor& t) const;

  friend struct GraphOpsAccess;
};

}  // namespace stc
