#pragma once

#include <map>
#include <string>
#include <vector>

namespace stc {

struct ScoreReport {
  std::string metric;  // wer | bleu | ter | ppl
  double value = 0.0;
  std::map<std::string, double> counts;
  std::string to_line() const;  // "metric value k1=v1 k2=v2 ..."
};

using TokenCorpus = std::vector<std::vector<int>>;

// Levenshtein edits (sub=del=ins=1) summed over the corpus / reference tokens
ScoreReport wer(const TokenCorpus& refs, const TokenCorpus& hyps);

// corpus-level geometric mean of clipped n-gram precisions times brevity
// penalty; any order with zero precision gives score 0 (no smoothing)
ScoreReport bleu(const TokenCorpus& refs, const TokenCorpus& hyps, int max_n = 4);

// edit distance plus greedy block shifts (tercom-style heuristic, not
// tercom-compatible); a shift is taken only when it strictly lowers the total
ScoreReport ter_simplified(const TokenCorpus& refs, const TokenCorpus& hyps);

// exp(total CE / tokens); the caller supplies unsmoothed cross entropy
ScoreReport perplexity_report(double total_cross_entropy, long target_tokens);

int edit_distance(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace stc
