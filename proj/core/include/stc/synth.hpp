#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "stc/rng.hpp"
#include "stc/tensor.hpp"
#include "stc/vocab.hpp"

namespace stc {

// Desk-scale stand-in for a speech translation corpus: each source token emits
// a fixed random signature vector a few frames long, plus Gaussian noise, and
// the translation is a deterministic cipher of the transcript.
struct SyntheticTaskSpec {
  int vocab_letters = 26;
  int feature_dim = 16;
  int frames_min = 2, frames_max = 5;
  double noise_sigma = 0.0;
  int min_len = 3, max_len = 12;
  enum class Rule { kCipher, kCipherReverse };
  Rule rule = Rule::kCipherReverse;
  std::uint64_t seed = 1;

  // derived once from seed; shared across train/dev/test
  std::vector<std::vector<double>> signatures;  // per letter
  std::vector<int> cipher;                      // letter index permutation

  Vocabulary src_vocab() const { return Vocabulary::letters(vocab_letters, false); }
  Vocabulary tgt_vocab() const { return Vocabulary::letters(vocab_letters, true); }

  std::string to_json_string() const;
  static SyntheticTaskSpec from_json_string(const std::string& text);
};

SyntheticTaskSpec make_task(int vocab_letters, int feature_dim, double noise_sigma,
                            std::uint64_t seed, SyntheticTaskSpec::Rule rule =
                                SyntheticTaskSpec::Rule::kCipherReverse);

struct CorpusTriple {
  std::string id;
  Tensor features;               // T x d
  std::vector<int> transcript;   // inner tokens over the source vocabulary
  std::vector<int> translation;  // inner tokens over the target vocabulary; may be empty
};

using Corpus = std::vector<CorpusTriple>;

std::vector<int> apply_target_rule(const SyntheticTaskSpec& spec,
                                   const std::vector<int>& transcript);
Tensor render_features(const SyntheticTaskSpec& spec, const std::vector<int>& transcript, Rng& rng);
Corpus gen_corpus(const SyntheticTaskSpec& spec, int n);

// nearest-signature frame decoding with repeat collapsing; exact on noiseless
// features of transcripts without adjacent duplicate letters
std::vector<int> nearest_signature_decode(const SyntheticTaskSpec& spec, const Tensor& features);

// Corpus container: <prefix>.txt with one record per line
//   id<TAB>transcript tokens<TAB>translation tokens<TAB>@offset
// and <prefix>.feats with per-record blobs (u64 T, u64 d, f64 data, LE).
void write_corpus(const std::string& prefix, const Corpus& corpus, const Vocabulary& src,
                  const Vocabulary& tgt);
Corpus read_corpus(const std::string& prefix, const Vocabulary& src, const Vocabulary& tgt);

struct SplitResult {
  Corpus train, dev, test;
};
SplitResult split(const Corpus& corpus, const std::array<double, 3>& fractions,
                  std::uint64_t seed);

}  // namespace stc
