#include "stc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace stc {

std::string ScoreReport::to_line() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << metric << " " << value;
  for (const auto& [k, v] : counts) os << " " << k << "=" << v;
  return os.str();
}

int edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

ScoreReport wer(const TokenCorpus& refs, const TokenCorpus& hyps) {
  if (refs.size() != hyps.size()) throw std::invalid_argument("wer: corpus length mismatch");
  long edits = 0, ref_tokens = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    edits += edit_distance(refs[i], hyps[i]);
    ref_tokens += static_cast<long>(refs[i].size());
  }
  ScoreReport r;
  r.metric = "wer";
  r.value = ref_tokens > 0 ? static_cast<double>(edits) / static_cast<double>(ref_tokens) : 0.0;
  r.counts = {{"edits", static_cast<double>(edits)},
              {"ref_tokens", static_cast<double>(ref_tokens)}};
  return r;
}

ScoreReport bleu(const TokenCorpus& refs, const TokenCorpus& hyps, int max_n) {
  if (refs.size() != hyps.size()) throw std::invalid_argument("bleu: corpus length mismatch");
  if (refs.empty()) throw std::invalid_argument("bleu: empty corpus");
  std::vector<long> match(static_cast<std::size_t>(max_n), 0);
  std::vector<long> total(static_cast<std::size_t>(max_n), 0);
  long ref_len = 0, hyp_len = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ref_len += static_cast<long>(refs[i].size());
    hyp_len += static_cast<long>(hyps[i].size());
    for (int n = 1; n <= max_n; ++n) {
      std::map<std::vector<int>, long> ref_counts;
      for (std::size_t s = 0; s + n <= refs[i].size(); ++s)
        ++ref_counts[{refs[i].begin() + s, refs[i].begin() + s + n}];
      std::map<std::vector<int>, long> hyp_counts;
      for (std::size_t s = 0; s + n <= hyps[i].size(); ++s)
        ++hyp_counts[{hyps[i].begin() + s, hyps[i].begin() + s + n}];
      for (const auto& [gram, c] : hyp_counts) {
        total[n - 1] += c;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) match[n - 1] += std::min(c, it->second);
      }
    }
  }
  ScoreReport r;
  r.metric = "bleu";
  r.counts = {{"ref_len", static_cast<double>(ref_len)},
              {"hyp_len", static_cast<double>(hyp_len)}};
  double log_precision = 0.0;
  bool zero = false;
  for (int n = 1; n <= max_n; ++n) {
    r.counts["match" + std::to_string(n)] = static_cast<double>(match[n - 1]);
    r.counts["total" + std::to_string(n)] = static_cast<double>(total[n - 1]);
    if (match[n - 1] == 0 || total[n - 1] == 0)
      zero = true;  // no smoothing
    else
      log_precision += std::log(static_cast<double>(match[n - 1]) / static_cast<double>(total[n - 1]));
  }
  if (zero || hyp_len == 0) {
    r.value = 0.0;
    return r;
  }
  const double bp = hyp_len >= ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  r.value = bp * std::exp(log_precision / max_n);
  r.counts["brevity_penalty"] = bp;
  return r;
}

namespace {

// best edit distance achievable with one block shift of hyp, or the current
// distance when no shift helps
int best_single_shift(const std::vector<int>& ref, std::vector<int>& hyp) {
  const std::size_t m = hyp.size();
  int best = edit_distance(ref, hyp);
  std::vector<int> best_hyp;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t len = 1; i + len <= m; ++len) {
      std::vector<int> rest;
      rest.reserve(m - len);
      rest.insert(rest.end(), hyp.begin(), hyp.begin() + i);
      rest.insert(rest.end(), hyp.begin() + i + len, hyp.end());
      for (std::size_t pos = 0; pos <= rest.size(); ++pos) {
        if (pos == i) continue;  // no-op move
        std::vector<int> moved;
        moved.reserve(m);
        moved.insert(moved.end(), rest.begin(), rest.begin() + pos);
        moved.insert(moved.end(), hyp.begin() + i, hyp.begin() + i + len);
        moved.insert(moved.end(), rest.begin() + pos, rest.end());
        const int d = edit_distance(ref, moved);
        if (d < best) {
          best = d;
          best_hyp = std::move(moved);
        }
      }
    }
  }
  if (!best_hyp.empty()) hyp = std::move(best_hyp);
  return best;
}

}  // namespace

ScoreReport ter_simplified(const TokenCorpus& refs, const TokenCorpus& hyps) {
  if (refs.size() != hyps.size()) throw std::invalid_argument("ter: corpus length mismatch");
  long total_cost = 0, ref_tokens = 0, total_shifts = 0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ref_tokens += static_cast<long>(refs[i].size());
    std::vector<int> hyp = hyps[i];
    int edits = edit_distance(refs[i], hyp);
    int shifts = 0;
    // a shift costs 1, so it is taken only when it saves at least 2 edits
    while (edits > 1) {
      std::vector<int> trial = hyp;
      const int after = best_single_shift(refs[i], trial);
      if (after + 1 >= edits) break;
      hyp = std::move(trial);
      edits = after;
      ++shifts;
    }
    total_cost += edits + shifts;
    total_shifts += shifts;
  }
  ScoreReport r;
  r.metric = "ter";
  r.value = ref_tokens > 0 ? static_cast<double>(total_cost) / static_cast<double>(ref_tokens) : 0.0;
  r.counts = {{"edits_plus_shifts", static_cast<double>(total_cost)},
              {"shifts", static_cast<double>(total_shifts)},
              {"ref_tokens", static_cast<double>(ref_tokens)}};
  return r;
}

ScoreReport perplexity_report(double total_cross_entropy, long target_tokens) {
  if (target_tokens <= 0) throw std::invalid_argument("perplexity: empty corpus");
  ScoreReport r;
  r.metric = "ppl";
  r.value = std::exp(total_cross_entropy / static_cast<double>(target_tokens));
  r.counts = {{"cross_entropy", total_cross_entropy},
              {"target_tokens", static_cast<double>(target_tokens)}};
  return r;
}

}  // namespace stc
