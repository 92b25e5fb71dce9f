#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "stc/gradcheck.hpp"
#include "stc/models.hpp"
#include "stc/rng.hpp"

using namespace stc;

namespace {

Tensor random_frames(std::size_t t, std::size_t d, Rng& rng) {
  Tensor f = Tensor::zeros({t, d});
  for (auto& x : f.values()) x = static_cast<real>(rng.normal());
  return f;
}

EncoderConfig small_enc(int input_dim, int embed = 0) {
  EncoderConfig e;
  e.num_layers = 2;
  e.hidden = 8;
  e.pool_factors = {2};
  e.embed_dim = embed;
  e.input_dim = input_dim;
  return e;
}

DecoderConfig small_dec() {
  DecoderConfig d;
  d.hidden = 8;
  d.embed_dim = 6;
  d.attention_dim = 8;
  return d;
}

struct Fixture {
  Vocabulary src = Vocabulary::letters(6);
  Vocabulary tgt = Vocabulary::letters(6, true);
  ComponentGraph asr = init_asr(small_enc(5), small_dec(), src, 5, 1);
  ComponentGraph mt = init_mt(small_enc(6, 6), small_dec(), src, tgt, 2);
};

bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a.at(i) != b.at(i)) return false;
  return true;
}

}  // namespace

TEST_CASE("init_asr parameter naming and shapes") {
  Fixture f;
  CHECK(f.asr.kind == "asr");
  CHECK(f.asr.has_param("asr.encoder.layer0.fwd.w_x"));
  CHECK(f.asr.has_param("asr.encoder.layer1.bwd.w_h"));
  CHECK(f.asr.has_param("asr.decoder.embed"));
  CHECK(f.asr.has_param("asr.decoder.attn.v"));
  CHECK(f.asr.param("asr.encoder.layer0.fwd.w_x").shape() == Shape{32, 5});
  CHECK(f.asr.param("asr.encoder.layer1.fwd.w_x").shape() == Shape{32, 16});
  CHECK(f.asr.param("asr.decoder.out.w").dim(0) == static_cast<std::size_t>(f.src.size()));
  CHECK_THROWS_AS(f.asr.param("nope"), std::out_of_range);
}

TEST_CASE("asr_forward basics") {
  Fixture f;
  Rng rng(3);
  Tensor frames = random_frames(12, 5, rng);
  ForwardOptions opt;
  Graph g;
  std::vector<int> transcript = frame_tokens({4, 5, 6});
  ForwardResult res = asr_forward(g, f.asr, frames, transcript, opt);
  CHECK(res.target_tokens == 4);
  CHECK(res.loss.item() > 0);

  // untrained model predicts roughly uniformly: per-token loss near log |V|
  const double per_token = res.loss.item() / res.target_tokens;
  CHECK(per_token == doctest::Approx(std::log(f.src.size())).epsilon(0.15));

  // posterior rows are stochastic and include the EOS step
  ForwardOptions popt;
  popt.want_posteriors = true;
  Graph g2;
  ForwardResult res2 = asr_forward(g2, f.asr, frames, transcript, popt);
  REQUIRE(res2.posteriors.dim(0) == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    double sum = 0;
    for (int v = 0; v < f.src.size(); ++v) sum += res2.posteriors.at(r * f.src.size() + v);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }

  CHECK_THROWS_AS(asr_forward(g, f.asr, Tensor::zeros({0, 5}), transcript, opt),
                  std::invalid_argument);
  CHECK_THROWS_WITH_AS(asr_forward(g, f.asr, frames, {4, 5}, opt),
                       doctest::Contains("framed with BOS and EOS"), std::invalid_argument);
}

TEST_CASE("mt_forward hard tokens vs one-hot rows bit-identical") {
  Fixture f;
  std::vector<int> src = {4, 6, 5};
  std::vector<int> tgt = frame_tokens({7, 8});
  ForwardOptions opt;
  Graph g1, g2;
  ForwardResult hard = mt_forward(g1, f.mt, src, tgt, opt);

  // one-hot posterior rows for the same source (incl. EOS row)
  const auto V = static_cast<std::size_t>(f.src.size());
  Tensor rows = Tensor::zeros({4, V});
  rows.values()[0 * V + 4] = 1;
  rows.values()[1 * V + 6] = 1;
  rows.values()[2 * V + 5] = 1;
  rows.values()[3 * V + Vocabulary::kEos] = 1;
  ForwardResult soft = mt_forward(g2, f.mt, rows, 1.0, BridgeMode::kSoft, tgt, opt);
  CHECK(hard.loss.item() == soft.loss.item());

  CHECK_THROWS_WITH_AS(mt_forward(g1, f.mt, std::vector<int>{}, tgt, opt),
                       doctest::Contains("empty source"), std::invalid_argument);
}

TEST_CASE("build_cascade") {
  Fixture f;
  ComponentGraph cascade = build_cascade(f.asr, f.mt);
  CHECK(cascade.kind == "cascade");
  CHECK(cascade.params.size() == f.asr.params.size() + f.mt.params.size());
  for (const auto& [name, t] : f.asr.params) CHECK(bit_equal(t, cascade.param(name)));
  for (const auto& [name, t] : f.mt.params) CHECK(bit_equal(t, cascade.param(name)));

  // vocab mismatch
  Vocabulary other = Vocabulary::letters(7);
  ComponentGraph mt_bad = init_mt(small_enc(6, 6), small_dec(), other, f.tgt, 2);
  CHECK_THROWS_WITH_AS(build_cascade(f.asr, mt_bad), doctest::Contains("vocabulary mismatch"),
                       std::invalid_argument);
}

TEST_CASE("build_tight keeps every cascade parameter") {
  Fixture f;
  ComponentGraph cascade = build_cascade(f.asr, f.mt);
  BridgeConfig bridge;
  ComponentGraph tight = build_tight(cascade, bridge);
  CHECK(tight.kind == "tight");
  REQUIRE(tight.params.size() == cascade.params.size());
  for (const auto& [name, t] : cascade.params) CHECK(bit_equal(t, tight.param(name)));
  BridgeConfig back = bridge_config(tight);
  CHECK(back.train_gamma == 1.0);
  CHECK(back.decode_gamma == 2.0);
}

TEST_CASE("tight gradient reaches asr encoder (soft mode)") {
  Fixture f;
  ComponentGraph tight = build_tight(build_cascade(f.asr, f.mt), BridgeConfig{});
  Rng rng(5);
  Tensor frames = random_frames(8, 5, rng);
  Graph g;
  ForwardOptions opt;
  opt.want_posteriors = true;
  ForwardResult ar = asr_forward(g, tight, frames, frame_tokens({4, 5}), opt);
  ForwardResult mr = mt_forward(g, tight, ar.posteriors, 1.0, BridgeMode::kSoft,
                                frame_tokens({7, 8}), ForwardOptions{});
  g.backward(mr.loss);
  const Tensor& enc = tight.param("asr.encoder.layer0.fwd.w_x");
  REQUIRE(enc.has_grad());
  double norm = 0;
  for (real v : enc.grad()) norm += std::fabs(static_cast<double>(v));
  CHECK(norm > 0);
}

TEST_CASE("build_direct drops asr decoder and mt encoder") {
  Fixture f;
  ComponentGraph direct = build_direct(f.asr, f.mt, 0, 9);
  CHECK(direct.kind == "direct");
  CHECK(direct.params.size() < build_cascade(f.asr, f.mt).params.size());
  CHECK(direct.has_param("asr.encoder.layer0.fwd.w_x"));
  CHECK(direct.has_param("mt.decoder.embed"));
  CHECK(direct.has_param("adapter.w"));
  CHECK_FALSE(direct.has_param("asr.decoder.embed"));
  CHECK_FALSE(direct.has_param("mt.encoder.embed"));
  CHECK(bit_equal(direct.param("asr.encoder.layer0.fwd.w_x"),
                  f.asr.param("asr.encoder.layer0.fwd.w_x")));

  Rng rng(6);
  Graph g;
  ForwardResult res = direct_forward(g, direct, random_frames(8, 5, rng), frame_tokens({7, 8}),
                                     ForwardOptions{});
  CHECK(res.loss.item() > 0);
}

TEST_CASE("apply_freeze prefix semantics") {
  Fixture f;
  ComponentGraph cascade = build_cascade(f.asr, f.mt);
  apply_freeze(cascade, FreezeMask{{"asr.encoder", "asr.decoder"}});
  CHECK(cascade.frozen("asr.encoder.layer0.fwd.w_x"));
  CHECK(cascade.frozen("asr.decoder.embed"));
  CHECK_FALSE(cascade.frozen("mt.decoder.embed"));

  // prefix must end on a name boundary
  ComponentGraph c2 = build_cascade(f.asr, f.mt);
  CHECK_THROWS_WITH_AS(apply_freeze(c2, FreezeMask{{"asr.enc"}}),
                       doctest::Contains("unknown freeze prefix"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(apply_freeze(c2, FreezeMask{{"nothing.here"}}),
                       doctest::Contains("unknown freeze prefix"), std::invalid_argument);
  CHECK_NOTHROW(apply_freeze(c2, FreezeMask{{}}));
}

TEST_CASE("checkpoint round trip is bit exact") {
  Fixture f;
  ComponentGraph tight = build_tight(build_cascade(f.asr, f.mt), BridgeConfig{});
  apply_freeze(tight, FreezeMask{{"asr.encoder"}});
  const auto path = (std::filesystem::temp_directory_path() / "stc_test_ckpt.bin").string();
  save_checkpoint(tight, path);
  ComponentGraph back = load_checkpoint(path);
  CHECK(back.kind == tight.kind);
  CHECK(back.arch == tight.arch);
  REQUIRE(back.params.size() == tight.params.size());
  for (const auto& [name, t] : tight.params) CHECK(bit_equal(t, back.param(name)));
  CHECK(back.frozen("asr.encoder.layer0.fwd.w_x"));
  CHECK(checkpoint_bytes(back) == checkpoint_bytes(tight));
  std::remove(path.c_str());
}

TEST_CASE("load_checkpoint rejects garbage") {
  const auto path = (std::filesystem::temp_directory_path() / "stc_test_garbage.bin").string();
  {
    FILE* fp = std::fopen(path.c_str(), "wb");
    std::fputs("not a checkpoint", fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("frame and inner tokens") {
  auto framed = frame_tokens({4, 5});
  CHECK(framed == std::vector<int>{Vocabulary::kBos, 4, 5, Vocabulary::kEos});
  CHECK(inner_tokens(framed) == std::vector<int>{4, 5});
  CHECK_THROWS_AS(inner_tokens({4, 5}), std::invalid_argument);
}

TEST_CASE("encoder pooling feeds attention with the reduced length") {
  Fixture f;
  Rng rng(8);
  Graph g;
  Seq2SeqView view = asr_view(f.asr);
  Tensor enc = encode_rows(g, view, random_frames(12, 5, rng), ForwardOptions{});
  CHECK(enc.dim(0) == 6);  // one pool by 2
  CHECK(enc.dim(1) == 16);
}
