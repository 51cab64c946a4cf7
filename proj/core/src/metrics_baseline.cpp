#include "capcritic/metrics_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "capcritic/error.hpp"

namespace capcritic {

namespace {

constexpr double kBleuFloor = 1e-9;
constexpr double kRougeBeta = 1.2;
constexpr std::size_t kCiderMaxN = 4;

void check_inputs(Tokens candidate, std::size_t refs, const char* metric) {
  if (candidate.empty()) throw DataError(std::string(metric) + ": empty candidate caption");
  if (refs == 0) throw ConfigError(std::string(metric) + ": no reference captions");
}

std::vector<Tokens> as_tokens(std::span<const Caption* const> refs) {
  std::vector<Tokens> out;
  out.reserve(refs.size());
  for (const Caption* c : refs) out.push_back(c->tokens());
  return out;
}

std::size_t lcs_length(Tokens a, Tokens b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

NgramCounts count_ngrams(Tokens tokens, std::size_t n) {
  NgramCounts out;
  if (n == 0 || tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++out[Ngram(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

double bleu(Tokens candidate, std::span<const Tokens> references, std::size_t n_max) {
  check_inputs(candidate, references.size(), "bleu");
  if (n_max < 1 || n_max > 4) throw ConfigError("bleu order must be between 1 and 4");
  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 1; n <= n_max && n <= candidate.size(); ++n) {
    const NgramCounts cand = count_ngrams(candidate, n);
    NgramCounts max_ref;
    for (Tokens r : references) {
      for (const auto& [gram, c] : count_ngrams(r, n)) max_ref[gram] = std::max(max_ref[gram], c);
    }
    std::size_t clipped = 0, total = 0;
    for (const auto& [gram, c] : cand) {
      total += c;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    const double p = clipped == 0 ? kBleuFloor : static_cast<double>(clipped) / static_cast<double>(total);
    log_sum += std::log(p);
    ++orders;
  }
  const double c = static_cast<double>(candidate.size());
  std::size_t best = references.front().size();
  for (Tokens r : references) {
    const auto d = [&](std::size_t len) { return std::abs(static_cast<double>(len) - c); };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  const double r = static_cast<double>(best);
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

double bleu(const Caption& candidate, std::span<const Caption* const> references, std::size_t n_max) {
  const auto refs = as_tokens(references);
  return bleu(candidate.tokens(), refs, n_max);
}

double rouge_l(Tokens candidate, std::span<const Tokens> references) {
  check_inputs(candidate, references.size(), "rouge_l");
  double best = 0.0;
  const double b2 = kRougeBeta * kRougeBeta;
  for (Tokens r : references) {
    if (r.empty()) continue;
    const double lcs = static_cast<double>(lcs_length(candidate, r));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(candidate.size());
    const double rec = lcs / static_cast<double>(r.size());
    best = std::max(best, (1.0 + b2) * p * rec / (rec + b2 * p));
  }
  return best;
}

double rouge_l(const Caption& candidate, std::span<const Caption* const> references) {
  const auto refs = as_tokens(references);
  return rouge_l(candidate.tokens(), refs);
}

CiderStats CiderStats::build(std::span<const std::vector<Tokens>> reference_sets) {
  CiderStats s;
  s.documents_ = reference_sets.size();
  for (const auto& refs : reference_sets) {
    std::set<Ngram> seen;
    for (Tokens r : refs) {
      for (std::size_t n = 1; n <= kCiderMaxN; ++n) {
        for (auto& [gram, c] : count_ngrams(r, n)) seen.insert(gram);
      }
    }
    for (const auto& g : seen) ++s.df_[g];
  }
  return s;
}

CiderStats CiderStats::build(const Dataset& dataset) {
  std::vector<std::vector<Tokens>> sets;
  sets.reserve(dataset.size());
  for (const auto& e : dataset.images) {
    std::vector<Tokens> refs;
    for (const auto& r : e.references) refs.push_back(r.tokens());
    sets.push_back(std::move(refs));
  }
  return build(sets);
}

std::size_t CiderStats::df(const Ngram& gram) const {
  auto it = df_.find(gram);
  return it == df_.end() ? 0 : it->second;
}

double CiderStats::idf(const Ngram& gram) const {
  const double d = static_cast<double>(std::max<std::size_t>(df(gram), 1));
  return std::log(static_cast<double>(documents_) / d);
}

namespace {

using TfIdf = std::map<Ngram, double>;

TfIdf tfidf(Tokens tokens, std::size_t n, const CiderStats& stats) {
  TfIdf v;
  for (const auto& [gram, c] : count_ngrams(tokens, n)) v[gram] = static_cast<double>(c) * stats.idf(gram);
  return v;
}

double norm(const TfIdf& v) {
  double s = 0.0;
  for (const auto& [g, x] : v) s += x * x;
  return std::sqrt(s);
}

double cosine(const TfIdf& a, const TfIdf& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double dot = 0.0;
  for (const auto& [g, x] : a) {
    auto it = b.find(g);
    if (it != b.end()) dot += x * it->second;
  }
  return dot / (na * nb);
}

}  // namespace

double cider(Tokens candidate, std::span<const Tokens> references, const CiderStats& stats) {
  check_inputs(candidate, references.size(), "cider");
  if (stats.documents() == 0) throw ConfigError("cider: corpus statistics are empty");
  double total = 0.0;
  for (std::size_t n = 1; n <= kCiderMaxN; ++n) {
    const TfIdf c = tfidf(candidate, n, stats);
    double per_n = 0.0;
    for (Tokens r : references) per_n += cosine(c, tfidf(r, n, stats));
    total += per_n / static_cast<double>(references.size());
  }
  return total / static_cast<double>(kCiderMaxN);
}

double cider(const Caption& candidate, std::span<const Caption* const> references, const CiderStats& stats) {
  const auto refs = as_tokens(references);
  return cider(candidate.tokens(), refs, stats);
}

std::vector<double> normalize_scores(std::span<const double> scores, std::span<const double> human_scores) {
  if (human_scores.empty()) throw DataError("normalize_scores: no human scores");
  double mean = 0.0;
  for (double h : human_scores) mean += h;
  mean /= static_cast<double>(human_scores.size());
  if (!(mean > 0.0)) throw DataError("normalize_scores: human mean score must be positive");
  std::vector<double> out;
  out.reserve(scores.size());
  for (double s : scores) out.push_back(s / mean);
  return out;
}

}  // namespace capcritic
