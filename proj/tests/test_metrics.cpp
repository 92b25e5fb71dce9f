#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "stc/metrics.hpp"
#include "stc/rng.hpp"

using namespace stc;

namespace {

// Exponential-time reference edit distance by exhaustive recursion.
int brute_edits(const std::vector<int>& a, std::size_t i, const std::vector<int>& b,
                std::size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  int best = brute_edits(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1);  // match/sub
  best = std::min(best, brute_edits(a, i + 1, b, j) + 1);               // deletion
  best = std::min(best, brute_edits(a, i, b, j + 1) + 1);               // insertion
  return best;
}

std::vector<int> random_seq(Rng& rng, int max_len, int vocab) {
  std::vector<int> s(static_cast<std::size_t>(rng.uniform_int(0, max_len)));
  for (auto& t : s) t = rng.uniform_int(0, vocab - 1);
  return s;
}

}  // namespace

TEST_CASE("edit distance matches brute force on 500 random pairs") {
  Rng rng(61);
  for (int iter = 0; iter < 500; ++iter) {
    auto a = random_seq(rng, 6, 4);
    auto b = random_seq(rng, 6, 4);
    CHECK(edit_distance(a, b) == brute_edits(a, 0, b, 0));
  }
}

TEST_CASE("wer hand oracles") {
  CHECK(wer({{1, 2, 3}}, {{1, 2, 3}}).value == 0.0);
  CHECK(wer({{1, 2, 3}}, {{1, 9, 3}}).value == doctest::Approx(1.0 / 3));
  CHECK(wer({{1, 2, 3}}, {{1, 3}}).value == doctest::Approx(1.0 / 3));
  CHECK(wer({{1, 2, 3}}, {{}}).value == doctest::Approx(1.0));
  // corpus-level: edits and reference lengths are summed, not averaged
  ScoreReport r = wer({{1, 2}, {1, 2, 3, 4, 5, 6}}, {{9, 9}, {1, 2, 3, 4, 5, 6}});
  CHECK(r.value == doctest::Approx(2.0 / 8));
  CHECK(r.counts.at("edits") == 2.0);
  CHECK(r.counts.at("ref_tokens") == 8.0);
  CHECK_THROWS_AS(wer({{1}}, {{1}, {2}}), std::invalid_argument);
}

TEST_CASE("bleu oracles") {
  // identical corpus scores 1
  CHECK(bleu({{1, 2, 3, 4, 5}}, {{1, 2, 3, 4, 5}}).value == doctest::Approx(1.0));

  // hand-worked 3-token example with max_n = 2:
  // ref = [a b c], hyp = [a b b]
  // p1: matches a, b (clipped: b appears once in ref) = 2/3
  // p2: hyp bigrams {ab, bb}; ref bigrams {ab, bc} -> 1/2
  // no brevity penalty (equal lengths)
  const double expect = std::exp(0.5 * (std::log(2.0 / 3) + std::log(1.0 / 2)));
  CHECK(bleu({{1, 2, 3}}, {{1, 2, 2}}, 2).value == doctest::Approx(expect).epsilon(1e-12));

  // any zero n-gram precision collapses the score to 0 (no smoothing)
  CHECK(bleu({{1, 2, 3}}, {{1, 2, 2}}, 3).value == 0.0);
  CHECK(bleu({{1, 2, 3, 4}}, {{5, 6, 7, 8}}).value == 0.0);

  // brevity penalty: hyp shorter than ref by half -> exp(1 - r/c) = exp(-1)
  {
    ScoreReport r = bleu({{1, 2, 3, 4}}, {{1, 2}}, 2);
    const double p1 = 2.0 / 2, p2 = 1.0 / 1;
    const double bp = std::exp(1.0 - 4.0 / 2.0);
    CHECK(r.value == doctest::Approx(bp * std::exp(0.5 * (std::log(p1) + std::log(p2))))
                         .epsilon(1e-12));
    CHECK(r.counts.at("brevity_penalty") == doctest::Approx(bp).epsilon(1e-12));
  }

  // clipping: repeating a correct token does not inflate precision
  {
    ScoreReport r = bleu({{1, 2}}, {{1, 1, 1, 1}}, 1);
    CHECK(r.value == doctest::Approx(1.0 / 4).epsilon(1e-12));
  }
}

TEST_CASE("ter_simplified oracles") {
  // pure transposition of two halves: one block shift instead of four edits
  // ref = [a b c d], hyp = [c d a b] -> 1 shift / 4 tokens = 0.25
  CHECK(ter_simplified({{1, 2, 3, 4}}, {{3, 4, 1, 2}}).value == doctest::Approx(0.25));

  CHECK(ter_simplified({{1, 2, 3}}, {{1, 2, 3}}).value == 0.0);

  // a shift is only taken when it strictly beats plain edits, so TER <= WER
  Rng rng(62);
  for (int iter = 0; iter < 500; ++iter) {
    TokenCorpus refs = {random_seq(rng, 8, 5)};
    TokenCorpus hyps = {random_seq(rng, 8, 5)};
    if (refs[0].empty()) refs[0].push_back(1);
    CHECK(ter_simplified(refs, hyps).value <= wer(refs, hyps).value + 1e-12);
  }
}

TEST_CASE("perplexity report") {
  ScoreReport r = perplexity_report(2.0 * std::log(7.0), 2);
  CHECK(r.metric == "ppl");
  CHECK(r.value == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(perplexity_report(0.0, 5).value == doctest::Approx(1.0));
  CHECK_THROWS_AS(perplexity_report(1.0, 0), std::invalid_argument);
}

TEST_CASE("score report line format") {
  ScoreReport r = wer({{1, 2}}, {{1, 3}});
  const std::string line = r.to_line();
  CHECK(line.find("wer") == 0);
  CHECK(line.find("edits=") != std::string::npos);
}
