#include <doctest.h>

#include <cmath>

#include "stc/gradcheck.hpp"
#include "stc/layers.hpp"
#include "stc/rng.hpp"

using namespace stc;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& x : t.values()) x = static_cast<real>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

TEST_CASE("embed hard vs one-hot distribution match bit-for-bit") {
  Rng rng(1);
  Graph g;
  Tensor table = random_tensor({5, 3}, rng);
  Tensor hard = nn::embed(g, table, std::vector<int>{2, 0});
  Tensor dist = Tensor::zeros({2, 5});
  dist.values()[2] = 1;
  dist.values()[5] = 1;
  Tensor soft = nn::embed(g, table, dist);
  for (std::size_t i = 0; i < 6; ++i) CHECK(hard.at(i) == soft.at(i));
}

TEST_CASE("embed uniform distribution is the mean of rows") {
  Rng rng(2);
  Graph g;
  Tensor table = random_tensor({4, 2}, rng);
  Tensor dist = Tensor::from({1, 4}, {0.5, 0.5, 0, 0});
  Tensor e = nn::embed(g, table, dist);
  CHECK(e.at(0) == doctest::Approx(0.5 * (table.at(0) + table.at(2))).epsilon(1e-12));
  CHECK(e.at(1) == doctest::Approx(0.5 * (table.at(1) + table.at(3))).epsilon(1e-12));
}

TEST_CASE("embed is linear in the distribution") {
  Rng rng(3);
  Graph g;
  Tensor table = random_tensor({6, 4}, rng);
  Tensor p = Tensor::from({1, 6}, {0.1, 0.2, 0.3, 0.2, 0.1, 0.1});
  Tensor q = Tensor::from({1, 6}, {0.3, 0.1, 0.1, 0.1, 0.3, 0.1});
  const double a = 0.4;
  Tensor mix = Tensor::zeros({1, 6});
  for (std::size_t i = 0; i < 6; ++i)
    mix.values()[i] = static_cast<real>(a * p.at(i) + (1 - a) * q.at(i));
  Tensor em = nn::embed(g, table, mix);
  Tensor ep = nn::embed(g, table, p);
  Tensor eq = nn::embed(g, table, q);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(em.at(i) == doctest::Approx(a * ep.at(i) + (1 - a) * eq.at(i)).epsilon(1e-10));
}

TEST_CASE("embed rejects off-normalized rows and bad ids") {
  Rng rng(4);
  Graph g;
  Tensor table = random_tensor({3, 2}, rng);
  Tensor bad = Tensor::from({1, 3}, {0.5, 0.4, 0.2});  // sums to 1.1
  CHECK_THROWS_AS(nn::embed(g, table, bad), std::invalid_argument);
  CHECK_THROWS_WITH_AS(nn::embed(g, table, std::vector<int>{3}),
                       doctest::Contains("token id out of range"), std::invalid_argument);
}

TEST_CASE("lstm_step zero weights give zero state") {
  Graph g;
  nn::LstmParams p;
  p.w_x = Tensor::zeros({8, 3});
  p.w_h = Tensor::zeros({8, 2});
  p.b = Tensor::zeros({8});
  Tensor x = Tensor::from({3}, {1, 2, 3});
  auto [h, c] = nn::lstm_step(g, p, x, Tensor::zeros({2}), Tensor::zeros({2}));
  for (real v : h.values()) CHECK(v == 0.0);
  for (real v : c.values()) CHECK(v == 0.0);
}

TEST_CASE("lstm_step scalar hand oracle") {
  // hidden=1, input=1, all weights 1, bias 0, h=c=0, x=1:
  // i = f = o = sigmoid(1), g = tanh(1); c' = i*g; h' = o*tanh(c')
  Graph g;
  nn::LstmParams p;
  p.w_x = Tensor::full({4, 1}, 1);
  p.w_h = Tensor::full({4, 1}, 1);
  p.b = Tensor::zeros({4});
  Tensor x = Tensor::from({1}, {1});
  auto [h, c] = nn::lstm_step(g, p, x, Tensor::zeros({1}), Tensor::zeros({1}));
  const double sig = 1.0 / (1.0 + std::exp(-1.0));
  const double cexp = sig * std::tanh(1.0);
  CHECK(c.at(0) == doctest::Approx(cexp).epsilon(1e-12));
  CHECK(h.at(0) == doctest::Approx(sig * std::tanh(cexp)).epsilon(1e-12));
  CHECK(std::fabs(static_cast<double>(h.at(0))) < 1.0);
}

TEST_CASE("bilstm_encode pooling arithmetic") {
  Rng rng(5);
  auto layers = std::vector<std::pair<nn::LstmParams, nn::LstmParams>>{
      {nn::init_lstm(4, 3, rng), nn::init_lstm(4, 3, rng)},
      {nn::init_lstm(6, 3, rng), nn::init_lstm(6, 3, rng)}};
  Graph g;
  {
    Tensor in = random_tensor({12, 4}, rng);
    Tensor out = nn::bilstm_encode(g, layers, {3, 2}, in);
    CHECK(out.dim(0) == 2);
    CHECK(out.dim(1) == 6);
  }
  {
    Tensor in = random_tensor({13, 4}, rng);
    Tensor out = nn::bilstm_encode(g, layers, {3, 2}, in);
    CHECK(out.dim(0) == 3);  // ceil(ceil(13/3)/2)
  }
  {
    Tensor in = random_tensor({5, 4}, rng);
    Tensor out = nn::bilstm_encode(g, layers, {}, in);
    CHECK(out.dim(0) == 5);
  }
  CHECK_THROWS_AS(nn::bilstm_encode(g, layers, {}, Tensor::zeros({0, 4})), std::invalid_argument);
}

TEST_CASE("additive attention basics") {
  Rng rng(6);
  nn::AttentionParams p = nn::init_attention(3, 4, 5, rng);
  Graph g;
  {
    Tensor keys = random_tensor({1, 4}, rng);
    Tensor proj = nn::attention_project_keys(g, p, keys);
    auto [ctx, w] = nn::additive_attention(g, p, random_tensor({3}, rng), keys, proj);
    CHECK(w.at(0) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < 4; ++i) CHECK(ctx.at(i) == doctest::Approx(keys.at(i)));
  }
  {
    // identical keys -> uniform weights
    Tensor one = random_tensor({1, 4}, rng);
    Tensor keys = Tensor::zeros({3, 4});
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 4; ++c) keys.values()[r * 4 + c] = one.at(c);
    Tensor proj = nn::attention_project_keys(g, p, keys);
    auto [ctx, w] = nn::additive_attention(g, p, random_tensor({3}, rng), keys, proj);
    for (std::size_t i = 0; i < 3; ++i) CHECK(w.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-9));
  }
  {
    // weights sum to 1, permutation equivariance
    Tensor keys = random_tensor({4, 4}, rng);
    Tensor proj = nn::attention_project_keys(g, p, keys);
    Tensor q = random_tensor({3}, rng);
    auto [ctx, w] = nn::additive_attention(g, p, q, keys, proj);
    double sum = 0;
    for (std::size_t i = 0; i < 4; ++i) sum += w.at(i);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    // swap rows 0 and 1
    Tensor keys2 = keys.clone();
    for (std::size_t c = 0; c < 4; ++c)
      std::swap(keys2.values()[c], keys2.values()[4 + c]);
    Tensor proj2 = nn::attention_project_keys(g, p, keys2);
    auto [ctx2, w2] = nn::additive_attention(g, p, q, keys2, proj2);
    CHECK(w.at(0) == doctest::Approx(w2.at(1)).epsilon(1e-12));
    CHECK(w.at(1) == doctest::Approx(w2.at(0)).epsilon(1e-12));
    for (std::size_t i = 0; i < 4; ++i) CHECK(ctx.at(i) == doctest::Approx(ctx2.at(i)).epsilon(1e-12));
  }
}

TEST_CASE("label smoothed cross entropy") {
  Graph g;
  {
    // ratio 0: plain CE
    Tensor logits = Tensor::from({3}, {1, 2, 3});
    Tensor ls = g.log_softmax(logits, 0);
    Tensor loss = nn::label_smoothed_ce(g, logits, 1, 0.0);
    CHECK(loss.item() == doctest::Approx(-ls.at(1)).epsilon(1e-12));
  }
  {
    // uniform logits: loss = log|V| for any ratio
    Tensor logits = Tensor::zeros({8});
    Tensor loss = nn::label_smoothed_ce(g, logits, 3, 0.1);
    CHECK(loss.item() == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  }
  {
    // near one-hot prediction never reaches zero loss under smoothing
    Tensor logits = Tensor::zeros({10});
    logits.values()[4] = 50;
    Tensor loss = nn::label_smoothed_ce(g, logits, 4, 0.1);
    CHECK(loss.item() > 0.1);
  }
  CHECK_THROWS_WITH_AS(nn::label_smoothed_ce(g, Tensor::zeros({3}), 5, 0.1),
                       doctest::Contains("target out of range"), std::invalid_argument);
}

TEST_CASE("label smoothed CE gradient check") {
  Rng rng(7);
  Tensor logits = random_tensor({6}, rng, -2, 2);
  const double err = finite_difference_check(
      [](Graph& g, Tensor& t) { return nn::label_smoothed_ce(g, t, 2, 0.1); }, logits);
  CHECK(err < 1e-5);
}

TEST_CASE("dropout") {
  Rng rng(8);
  Graph g;
  Tensor x = Tensor::full({1000}, 1.0);
  {
    Tensor y = nn::dropout(g, x, 0.0, true, rng);
    for (std::size_t i = 0; i < 1000; ++i) CHECK(y.at(i) == 1.0);
  }
  {
    Tensor y = nn::dropout(g, x, 0.3, false, rng);
    for (std::size_t i = 0; i < 1000; ++i) CHECK(y.at(i) == 1.0);
  }
  {
    Tensor y = nn::dropout(g, x, 0.3, true, rng);
    double mean = 0;
    for (std::size_t i = 0; i < 1000; ++i) mean += y.at(i);
    mean /= 1000;
    CHECK(mean == doctest::Approx(1.0).epsilon(0.05));  // inverted scaling preserves the mean
  }
}

TEST_CASE("feature_mask") {
  Rng rng(9);
  Tensor x = Tensor::full({10, 6}, 2.0);
  {
    Tensor y = nn::feature_mask(x, 0, 0, 3, rng);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == 2.0);
  }
  {
    Tensor y = nn::feature_mask(x, 2, 1, 3, rng);
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) {
      const bool masked = y.at(i) == 0.0;
      CHECK((masked || y.at(i) == 2.0));
    }
    CHECK(x.at(0) == 2.0);  // input untouched
  }
}

TEST_CASE("init_weight scale and init_lstm forget bias") {
  Rng rng(10);
  Tensor w = nn::init_weight({16, 25}, 25, rng);
  for (real v : w.values()) CHECK(std::fabs(static_cast<double>(v)) <= 1.0 / 5 + 1e-12);
  CHECK(w.requires_grad());

  nn::LstmParams p = nn::init_lstm(4, 3, rng);
  CHECK(p.w_x.shape() == Shape{12, 4});
  CHECK(p.w_h.shape() == Shape{12, 3});
  // forget gate bias initialized to 1 (gate order i,f,g,o)
  for (std::size_t i = 3; i < 6; ++i) CHECK(p.b.at(i) == 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.b.at(i) == 0.0);
}

TEST_CASE("gradient flows through the encoder stack") {
  Rng rng(11);
  auto layers = std::vector<std::pair<nn::LstmParams, nn::LstmParams>>{
      {nn::init_lstm(3, 2, rng), nn::init_lstm(3, 2, rng)}};
  Tensor in = random_tensor({4, 3}, rng);
  const double err = finite_difference_check(
      [&](Graph& g, Tensor& t) { return g.sum(nn::bilstm_encode(g, layers, {2}, t)); }, in);
  CHECK(err < 1e-4);
}
