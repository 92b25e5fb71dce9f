#include <doctest.h>

#include <cmath>
#include <vector>

#include "stc/gradcheck.hpp"
#include "stc/rng.hpp"
#include "stc/tensor.hpp"

using namespace stc;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.values()) x = static_cast<real>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

TEST_CASE("softmax basics") {
  Graph g;
  Tensor z = Tensor::from({3}, {0, 0, 0});
  auto s = g.softmax(z, 0);
  for (real v : s.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  Tensor l = Tensor::from({2}, {std::log(2.0), 0.0});
  auto s2 = g.softmax(l, 0);
  CHECK(s2.at(0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(s2.at(1) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // stabilization: no overflow on huge logits
  Tensor big = Tensor::from({2}, {1000, 0});
  auto s3 = g.softmax(big, 0);
  CHECK(s3.at(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isfinite(static_cast<double>(s3.at(1))));

  Tensor bad = Tensor::from({2}, {std::numeric_limits<real>::infinity(), 0});
  CHECK_THROWS_WITH_AS(g.softmax(bad, 0), doctest::Contains("non-finite logits"),
                       std::invalid_argument);
}

TEST_CASE("softmax rows are stochastic") {
  Rng rng(3);
  Graph g;
  Tensor m = random_tensor({7, 5}, rng);
  Tensor s = g.softmax(m, 1);
  for (std::size_t r = 0; r < 7; ++r) {
    double sum = 0;
    for (std::size_t c = 0; c < 5; ++c) {
      const double v = s.at(r * 5 + c);
      CHECK(v >= 0);
      CHECK(v <= 1);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pow semantics") {
  Graph g;
  Tensor a = Tensor::from({2}, {0.5, 0.5});
  auto id = g.pow(a, 1.0);
  CHECK(id.at(0) == 0.5);

  Tensor b = Tensor::from({2}, {0.8, 0.2});
  auto sq = g.pow(b, 2.0);
  CHECK(sq.at(0) == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(sq.at(1) == doctest::Approx(0.04).epsilon(1e-12));

  Tensor c = Tensor::from({1}, {0.3});
  CHECK(g.pow(c, 0.0).at(0) == 1.0);

  Tensor neg = Tensor::from({1}, {-1.0});
  CHECK_THROWS_WITH_AS(g.pow(neg, 0.5), doctest::Contains("negative base"), std::invalid_argument);
}

TEST_CASE("pow gradient convention at zero") {
  Graph g;
  Tensor x = Tensor::from({2}, {0.0, 2.0});
  x.set_requires_grad(true);
  Tensor y = g.sum(g.pow(x, 2.0));
  g.backward(y);
  CHECK(x.grad()[0] == 0.0);  // grad = 0 where t = 0 and exponent > 1
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("backward hand oracles") {
  {
    Graph g;
    Tensor x = Tensor::from({3}, {1, 2, 3});
    x.set_requires_grad(true);
    g.backward(g.sum(x));
    for (real v : x.grad()) CHECK(v == 1.0);
  }
  {
    Graph g;
    Tensor x = Tensor::from({2}, {1, 2});
    x.set_requires_grad(true);
    g.backward(g.dot(x, x));
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    CHECK(x.grad()[1] == doctest::Approx(4.0));
  }
  {
    // detached tensor gets no grad
    Graph g;
    Tensor x = Tensor::from({2}, {1, 2});
    g.backward(g.sum(x));
    CHECK_FALSE(x.has_grad());
  }
}

TEST_CASE("backward requires scalar root") {
  Graph g;
  Tensor x = Tensor::from({2}, {1, 2});
  x.set_requires_grad(true);
  Tensor y = g.scale(x, 2.0);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("fan-out accumulates chain-rule contributions") {
  Graph g;
  Tensor x = Tensor::from({2}, {1, 2});
  x.set_requires_grad(true);
  Tensor y = g.add(g.sum(g.mul(x, x)), g.sum(x));  // x feeds two consumers
  g.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(3.0));  // 2x + 1
  CHECK(x.grad()[1] == doctest::Approx(5.0));
}

TEST_CASE("repeated backward accumulates unless zeroed") {
  Graph g;
  Tensor x = Tensor::from({1}, {3});
  x.set_requires_grad(true);
  Tensor y = g.sum(x);
  g.backward(y);
  g.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  x.zero_grad();
  g.backward(y);
  CHECK(x.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("finite difference oracle cases") {
  Rng rng(11);
  {
    Tensor x = random_tensor({4}, rng);
    const double err = finite_difference_check(
        [](Graph& g, Tensor& t) { return g.sum(g.mul(t, t)); }, x);
    CHECK(err < 1e-6);
  }
  {
    Tensor x = random_tensor({3}, rng);
    const double err = finite_difference_check(
        [](Graph& g, Tensor& t) {
          // constant in t: the zero-scaled term keeps the root on the tape
          return g.add(Tensor::scalar(5.0), g.scale(g.sum(t), 0.0));
        },
        x);
    CHECK(err == 0.0);
  }
  {
    Tensor x = random_tensor({3}, rng, 0.1, 2.0);
    const double err = finite_difference_check(
        [](Graph& g, Tensor& t) { return g.sum(g.pow(t, 2.0)); }, x);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("finite difference across the op set") {
  Rng rng(13);
  auto check = [](const std::function<Tensor(Graph&, Tensor&)>& f, Tensor x) {
    CHECK(finite_difference_check(f, x) < 1e-4);
  };
  check([](Graph& g, Tensor& t) { return g.sum(g.exp(t)); }, random_tensor({5}, rng));
  check([](Graph& g, Tensor& t) { return g.sum(g.log(t)); }, random_tensor({5}, rng, 0.2, 2.0));
  check([](Graph& g, Tensor& t) { return g.sum(g.tanh(t)); }, random_tensor({5}, rng));
  check([](Graph& g, Tensor& t) { return g.sum(g.sigmoid(t)); }, random_tensor({5}, rng));
  check([](Graph& g, Tensor& t) { return g.sum(g.log_softmax(t, 0)); }, random_tensor({6}, rng));
  check([](Graph& g, Tensor& t) { return g.pick(g.softmax(t, 0), 2); }, random_tensor({6}, rng));
  check([](Graph& g, Tensor& t) { return g.sum(g.max_pool_rows(t, 2)); },
        random_tensor({5, 3}, rng));
  check(
      [](Graph& g, Tensor& t) {
        Tensor m = Tensor::from({2, 3}, {1, -1, 2, 0.5, 1, -2});
        return g.sum(g.matvec(m, t));
      },
      random_tensor({3}, rng));
  check(
      [](Graph& g, Tensor& t) {
        Tensor m = Tensor::from({2, 3}, {1, -1, 2, 0.5, 1, -2});
        return g.sum(g.matmul_nt(t, m));
      },
      random_tensor({4, 3}, rng));
  check(
      [](Graph& g, Tensor& t) {
        Tensor probs = g.softmax(t, 1);
        return g.sum(g.sharpen_rows(probs, 2.0));
      },
      random_tensor({3, 4}, rng));
  check([](Graph& g, Tensor& t) { return g.sum(g.embed_rows(t, {0, 2, 0})); },
        random_tensor({3, 2}, rng));
  check(
      [](Graph& g, Tensor& t) {
        auto r0 = g.row(t, 0);
        auto r1 = g.row(t, 1);
        return g.dot(g.concat({r0, r1}), g.concat({r1, r0}));
      },
      random_tensor({2, 3}, rng));
}

TEST_CASE("matmul and friends hand oracles") {
  Graph g;
  Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from({2, 2}, {5, 6, 7, 8});
  Tensor c = g.matmul(a, b);
  CHECK(c.at(0) == 19);
  CHECK(c.at(1) == 22);
  CHECK(c.at(2) == 43);
  CHECK(c.at(3) == 50);

  Tensor v = Tensor::from({2}, {1, 1});
  Tensor mv = g.matvec(a, v);
  CHECK(mv.at(0) == 3);
  CHECK(mv.at(1) == 7);

  Tensor mvt = g.matvec_t(a, v);
  CHECK(mvt.at(0) == 4);
  CHECK(mvt.at(1) == 6);

  Tensor ar = g.add_rowvec(a, v);
  CHECK(ar.at(0) == 2);
  CHECK(ar.at(3) == 5);
}

TEST_CASE("max_pool_rows ceil convention with right padding") {
  Graph g;
  Tensor m = Tensor::from({5, 1}, {1, 5, 2, 3, 9});
  Tensor p = g.max_pool_rows(m, 2);
  REQUIRE(p.dim(0) == 3);
  CHECK(p.at(0) == 5);
  CHECK(p.at(1) == 3);
  CHECK(p.at(2) == 9);  // last row right-pads itself
}

TEST_CASE("stack slice reshape") {
  Graph g;
  Tensor a = Tensor::from({2}, {1, 2});
  Tensor b = Tensor::from({2}, {3, 4});
  Tensor m = g.stack_rows({a, b});
  REQUIRE(m.shape() == Shape{2, 2});
  CHECK(m.at(3) == 4);
  Tensor s = g.slice(g.reshape(m, {4}), 1, 2);
  CHECK(s.at(0) == 2);
  CHECK(s.at(1) == 3);
}

TEST_CASE("sharpen_rows semantics") {
  Graph g;
  {
    // gamma = 1: bit-level identity
    Tensor p = Tensor::from({1, 3}, {0.6, 0.3, 0.1});
    Tensor out = g.sharpen_rows(p, 1.0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(out.at(i) == p.at(i));
  }
  {
    Tensor p = Tensor::from({1, 2}, {0.8, 0.2});
    Tensor out = g.sharpen_rows(p, 2.0);
    CHECK(out.at(0) == doctest::Approx(0.64 / 0.68).epsilon(1e-12));
    CHECK(out.at(1) == doctest::Approx(0.04 / 0.68).epsilon(1e-12));
  }
  {
    // gamma = 0 on full support: uniform
    Tensor p = Tensor::from({1, 2}, {0.8, 0.2});
    Tensor out = g.sharpen_rows(p, 0.0);
    CHECK(out.at(0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  {
    // gamma = 0 without full support: degenerate
    Tensor p = Tensor::from({1, 2}, {1.0, 0.0});
    CHECK_THROWS_WITH_AS(g.sharpen_rows(p, 0.0), doctest::Contains("degenerate row"),
                         std::invalid_argument);
  }
  {
    // near one-hot at huge gamma
    Tensor p = Tensor::from({1, 3}, {0.6, 0.3, 0.1});
    Tensor out = g.sharpen_rows(p, 1024.0);
    CHECK(out.at(0) >= 1.0 - 1e-6);
  }
}

TEST_CASE("mul_mask and scalar broadcasting") {
  Graph g;
  Tensor x = Tensor::from({3}, {1, 2, 3});
  x.set_requires_grad(true);
  Tensor y = g.mul_mask(x, {1, 0, 1});
  CHECK(y.at(1) == 0);
  g.backward(g.sum(y));
  CHECK(x.grad()[1] == 0);
  CHECK(x.grad()[2] == 1);

  Tensor s = Tensor::scalar(2.0);
  Tensor z = g.mul(x, s);
  CHECK(z.at(2) == 6);
}
