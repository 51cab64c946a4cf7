#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "capcritic/corpus.hpp"

namespace capcritic {

using Tokens = std::span<const int>;
using Ngram = std::vector<int>;
using NgramCounts = std::map<Ngram, std::size_t>;

NgramCounts count_ngrams(Tokens tokens, std::size_t n);

// Sentence BLEU-n_max: clipped n-gram precisions, geometric mean, brevity
// penalty against the closest reference length (shorter wins a tie). A zero
// precision is replaced by 1e-9. Orders longer than the candidate are left
// out of the mean. DataError on an empty candidate, ConfigError on no
// references or n_max outside 1..4.
double bleu(Tokens candidate, std::span<const Tokens> references, std::size_t n_max);
double bleu(const Caption& candidate, std::span<const Caption* const> references, std::size_t n_max);

// LCS F-measure with beta = 1.2, best over references.
double rouge_l(Tokens candidate, std::span<const Tokens> references);
double rouge_l(const Caption& candidate, std::span<const Caption* const> references);

// Document frequencies of 1..4-grams; one document per image (the union of
// its references).
class CiderStats {
 public:
  static CiderStats build(std::span<const std::vector<Tokens>> reference_sets);
  static CiderStats build(const Dataset& dataset);

  std::size_t documents() const { return documents_; }
  std::size_t df(const Ngram& gram) const;
  // log(documents / max(df, 1))
  double idf(const Ngram& gram) const;

 private:
  std::size_t documents_ = 0;
  std::map<Ngram, std::size_t> df_;
};

// Plain CIDEr: per n, cosine of tf-idf vectors averaged over references,
// then averaged over n = 1..4. No length penalty, no x10 scale.
double cider(Tokens candidate, std::span<const Tokens> references, const CiderStats& stats);
double cider(const Caption& candidate, std::span<const Caption* const> references, const CiderStats& stats);

// Divides every score by mean(human_scores). DataError unless that mean is
// positive.
std::vector<double> normalize_scores(std::span<const double> scores, std::span<const double> human_scores);

}  // namespace capcritic
