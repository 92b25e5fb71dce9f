#include "stc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stc/config.hpp"

namespace stc {

std::string SyntheticTaskSpec::to_json_string() const {
  nlohmann::json j = {
      {"vocab_letters", vocab_letters},
      {"feature_dim", feature_dim},
      {"frames_min", frames_min},
      {"frames_max", frames_max},
      {"noise_sigma", noise_sigma},
      {"min_len", min_len},
      {"max_len", max_len},
      {"rule", rule == Rule::kCipherReverse ? "cipher_reverse" : "cipher"},
      {"seed", seed},
      {"signatures", signatures},
      {"cipher", cipher},
  };
  return j.dump(2);
}

SyntheticTaskSpec SyntheticTaskSpec::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SyntheticTaskSpec s;
  s.vocab_letters = j.at("vocab_letters").get<int>();
  s.feature_dim = j.at("feature_dim").get<int>();
  s.frames_min = j.at("frames_min").get<int>();
  s.frames_max = j.at("frames_max").get<int>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.min_len = j.at("min_len").get<int>();
  s.max_len = j.at("max_len").get<int>();
  s.rule = j.at("rule").get<std::string>() == "cipher_reverse" ? Rule::kCipherReverse : Rule::kCipher;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.signatures = j.at("signatures").get<std::vector<std::vector<double>>>();
  s.cipher = j.at("cipher").get<std::vector<int>>();
  return s;
}

SyntheticTaskSpec make_task(int vocab_letters, int feature_dim, double noise_sigma,
                            std::uint64_t seed, SyntheticTaskSpec::Rule rule) {
  if (vocab_letters < 1 || vocab_letters > 26)
    throw std::invalid_argument("make_task: vocab_letters must be in [1,26]");
  if (noise_sigma < 0) throw std::invalid_argument("make_task: noise_sigma must be >= 0");
  SyntheticTaskSpec s;
  s.vocab_letters = vocab_letters;
  s.feature_dim = feature_dim;
  s.noise_sigma = noise_sigma;
  s.seed = seed;
  s.rule = rule;
  Rng rng(Rng::derive(seed, 0xACDCull));
  s.signatures.resize(static_cast<std::size_t>(vocab_letters));
  for (auto& sig : s.signatures) {
    sig.resize(static_cast<std::size_t>(feature_dim));
    for (auto& x : sig) x = rng.normal();
  }
  s.cipher.resize(static_cast<std::size_t>(vocab_letters));
  for (int i = 0; i < vocab_letters; ++i) s.cipher[static_cast<std::size_t>(i)] = i;
  // Fisher-Yates
  for (int i = vocab_letters - 1; i > 0; --i) {
    const long j = rng.uniform_int(0, i);
    std::swap(s.cipher[static_cast<std::size_t>(i)], s.cipher[static_cast<std::size_t>(j)]);
  }
  return s;
}

std::vector<int> apply_target_rule(const SyntheticTaskSpec& spec,
                                   const std::vector<int>& transcript) {
  std::vector<int> out;
  out.reserve(transcript.size());
  for (int tok : transcript) {
    const int letter = tok - Vocabulary::kNumReserved;
    if (letter < 0 || letter >= spec.vocab_letters)
      throw std::invalid_argument("apply_target_rule: token outside letter range");
    out.push_back(Vocabulary::kNumReserved + spec.cipher[static_cast<std::size_t>(letter)]);
  }
  if (spec.rule == SyntheticTaskSpec::Rule::kCipherReverse)
    std::reverse(out.begin(), out.end());
  return out;
}

Tensor render_features(const SyntheticTaskSpec& spec, const std::vector<int>& transcript,
                       Rng& rng) {
  if (transcript.empty()) throw std::invalid_argument("render_features: empty transcript");
  const std::size_t d = static_cast<std::size_t>(spec.feature_dim);
  std::vector<real> frames;
  for (int tok : transcript) {
    const int letter = tok - Vocabulary::kNumReserved;
    if (letter < 0 || letter >= spec.vocab_letters)
      throw std::invalid_argument("render_features: token outside letter range");
    const auto& sig = spec.signatures[static_cast<std::size_t>(letter)];
    const long reps = rng.uniform_int(spec.frames_min, spec.frames_max);
    for (long r = 0; r < reps; ++r)
      for (std::size_t c = 0; c < d; ++c)
        frames.push_back(static_cast<real>(sig[c] + spec.noise_sigma * rng.normal()));
  }
  const std::size_t T = frames.size() / d;
  return Tensor::from({T, d}, std::move(frames));
}

Corpus gen_corpus(const SyntheticTaskSpec& spec, int n) {
  if (n < 1) throw std::invalid_argument("gen_corpus: n must be >= 1");
  Corpus corpus;
  corpus.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(i)));
    CorpusTriple t;
    std::ostringstream id;
    id << "utt" << i;
    t.id = id.str();
    const long len = rng.uniform_int(spec.min_len, spec.max_len);
    t.transcript.reserve(static_cast<std::size_t>(len));
    for (long j = 0; j < len; ++j)
      t.transcript.push_back(Vocabulary::kNumReserved +
                             static_cast<int>(rng.uniform_int(0, spec.vocab_letters - 1)));
    t.translation = apply_target_rule(spec, t.transcript);
    t.features = render_features(spec, t.transcript, rng);
    corpus.push_back(std::move(t));
  }
  return corpus;
}

std::vector<int> nearest_signature_decode(const SyntheticTaskSpec& spec, const Tensor& features) {
  const std::size_t T = features.dim(0), d = features.dim(1);
  auto fv = features.values();
  std::vector<int> per_frame(T);
  for (std::size_t t = 0; t < T; ++t) {
    double best = std::numeric_limits<double>::infinity();
    int best_letter = 0;
    for (int l = 0; l < spec.vocab_letters; ++l) {
      double dist = 0;
      const auto& sig = spec.signatures[static_cast<std::size_t>(l)];
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = static_cast<double>(fv[t * d + c]) - sig[c];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_letter = l;
      }
    }
    per_frame[t] = Vocabulary::kNumReserved + best_letter;
  }
  // collapse consecutive repeats
  std::vector<int> out;
  for (std::size_t t = 0; t < T; ++t)
    if (out.empty() || out.back() != per_frame[t]) out.push_back(per_frame[t]);
  return out;
}

// ---------------------------------------------------------------------------
// corpus container

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

std::string join_tokens(const std::vector<int>& tokens, const Vocabulary& vocab) {
  std::ostringstream os;
  for (std::size_t i = 0; i < tokens.size(); ++i) os << (i ? " " : "") << vocab.symbol(tokens[i]);
  return os.str();
}

std::vector<int> split_tokens(const std::string& text, const Vocabulary& vocab) {
  std::istringstream is(text);
  std::vector<int> out;
  std::string tok;
  while (is >> tok) out.push_back(vocab.id(tok));
  return out;
}

}  // namespace

void write_corpus(const std::string& prefix, const Corpus& corpus, const Vocabulary& src,
                  const Vocabulary& tgt) {
  std::string feats;
  std::ostringstream txt;
  for (const auto& t : corpus) {
    const std::uint64_t offset = feats.size();
    put<std::uint64_t>(feats, t.features.dim(0));
    put<std::uint64_t>(feats, t.features.dim(1));
    for (real x : t.features.values()) put<double>(feats, static_cast<double>(x));
    txt << t.id << "\t" << join_tokens(t.transcript, src) << "\t"
        << join_tokens(t.translation, tgt) << "\t@" << offset << "\n";
  }
  write_file_atomic(prefix + ".feats", feats);
  write_file_atomic(prefix + ".txt", txt.str());
}

Corpus read_corpus(const std::string& prefix, const Vocabulary& src, const Vocabulary& tgt) {
  const std::string txt = read_file(prefix + ".txt");
  const std::string feats = read_file(prefix + ".feats");
  Corpus corpus;
  std::istringstream is(txt);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4 || fields[0].empty() || fields[3].empty() || fields[3][0] != '@')
      throw std::runtime_error(prefix + ".txt line " + std::to_string(lineno) +
                               ": malformed record");
    CorpusTriple t;
    t.id = fields[0];
    t.transcript = split_tokens(fields[1], src);
    t.translation = split_tokens(fields[2], tgt);  // optional: empty for ASR-only corpora
    std::uint64_t offset = 0;
    try {
      offset = std::stoull(fields[3].substr(1));
    } catch (const std::exception&) {
      throw std::runtime_error(prefix + ".txt line " + std::to_string(lineno) +
                               ": malformed feature reference");
    }
    if (offset + 16 > feats.size())
      throw std::runtime_error("truncated feature blob for utterance " + t.id);
    std::uint64_t T = 0, d = 0;
    std::memcpy(&T, feats.data() + offset, 8);
    std::memcpy(&d, feats.data() + offset + 8, 8);
    const std::uint64_t bytes = T * d * 8;
    if (offset + 16 + bytes > feats.size())
      throw std::runtime_error("truncated feature blob for utterance " + t.id);
    std::vector<real> data(static_cast<std::size_t>(T * d));
    for (std::size_t i = 0; i < data.size(); ++i) {
      double x;
      std::memcpy(&x, feats.data() + offset + 16 + i * 8, 8);
      data[i] = static_cast<real>(x);
    }
    t.features = Tensor::from({static_cast<std::size_t>(T), static_cast<std::size_t>(d)},
                              std::move(data));
    corpus.push_back(std::move(t));
  }
  return corpus;
}

SplitResult split(const Corpus& corpus, const std::array<double, 3>& fractions,
                  std::uint64_t seed) {
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must sum to 1");
  std::vector<std::size_t> idx(corpus.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(Rng::derive(seed, 0x5917ull));
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(i) - 1))]);
  const std::size_t n = corpus.size();
  const std::size_t n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const std::size_t n_dev = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
  SplitResult out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = corpus[idx[i]];
    if (i < n_train)
      out.train.push_back(t);
    else if (i < n_train + n_dev)
      out.dev.push_back(t);
    else
      out.test.push_back(t);
  }
  return out;
}

}  // namespace stc
