#include "capcritic/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "capcritic/error.hpp"

namespace capcritic {

std::string to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::RC: return "RC";
    case TransformKind::WP: return "WP";
    case TransformKind::RW: return "RW";
  }
  return "?";
}

TransformKind parse_transform_kind(std::string_view text) {
  if (text == "RC" || text == "rc") return TransformKind::RC;
  if (text == "WP" || text == "wp") return TransformKind::WP;
  if (text == "RW" || text == "rw") return TransformKind::RW;
  throw ConfigError("unknown transform '" + std::string(text) + "' (expected RC, WP or RW)");
}

void TransformSpec::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("transform strength must lie in [0, 1]");
}

std::size_t transform_count(double gamma, int valid_len) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("transform strength must lie in [0, 1]");
  const auto len = static_cast<std::size_t>(std::max(valid_len, 0));
  // half-up rounding; the small offset absorbs products like 0.3 * 5 = 1.4999...
  const auto k = static_cast<std::size_t>(std::floor(gamma * static_cast<double>(len) + 0.5 + 1e-9));
  return std::min(std::max<std::size_t>(k, 2), len);
}

// ---------------------------------------------------------------------------

NeighborIndex::NeighborIndex(const Dataset& dataset) {
  const std::size_t n = dataset.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (double x : dataset.images[i].image.feature) sq += x * x;
    norms[i] = std::sqrt(sq);
  }
  std::vector<double> sim(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = dataset.images[i].image.feature;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& b = dataset.images[j].image.feature;
      double dot = 0.0;
      for (std::size_t d = 0; d < a.size(); ++d) dot += a[d] * b[d];
      const double denom = norms[i] * norms[j];
      const double s = denom > 0.0 ? dot / denom : 0.0;
      sim[i * n + j] = s;
      sim[j * n + i] = s;
    }
  }
  ranked_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& order = ranked_[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sim[i * n + a] > sim[i * n + b]; });
  }
}

std::size_t NeighborIndex::pool_size(double gamma) const {
  const std::size_t others = ranked_.empty() ? 0 : ranked_.size() - 1;
  const auto k = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(others) - 1e-9));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(others, 1));
}

std::vector<TransformedPair> transform_rc(const Dataset& dataset, double gamma, std::uint64_t seed) {
  if (dataset.size() < 2) throw DataError("transform RC needs at least two images");
  return transform_rc(dataset, NeighborIndex(dataset), gamma, seed);
}

std::vector<TransformedPair> transform_rc(const Dataset& dataset, const NeighborIndex& index, double gamma,
                                          std::uint64_t seed) {
  if (dataset.size() < 2) throw DataError("transform RC needs at least two images");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("transform strength must lie in [0, 1]");
  const std::size_t pool = index.pool_size(gamma);
  std::vector<TransformedPair> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    const std::size_t j = index.ranked(i)[rng.index(pool)];
    const auto& refs = dataset.images[j].references;
    const std::size_t r = rng.index(refs.size());
    out.push_back({i, j, r, refs[r]});
  }
  return out;
}

namespace {

std::vector<std::size_t> choose_positions(std::size_t len, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(len);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.index(len - i)]);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

Caption transform_wp(const Caption& caption, double gamma, const Vocabulary& vocab, std::uint64_t seed) {
  Rng rng(seed);
  return transform_wp(caption, gamma, vocab, rng);
}

Caption transform_wp(const Caption& caption, double gamma, const Vocabulary& vocab, Rng& rng) {
  if (caption.valid_len < 2) throw DataError("word permutation needs at least two tokens");
  const auto tokens = caption.tokens();
  if (std::all_of(tokens.begin(), tokens.end(), [&](int t) { return t == tokens.front(); })) {
    throw DataError("word permutation impossible: all tokens are identical");
  }
  const std::size_t k = transform_count(gamma, caption.valid_len);
  const std::size_t len = static_cast<std::size_t>(caption.valid_len);
  std::vector<int> ids(tokens.begin(), tokens.end());
  constexpr int kAttempts = 16;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const auto positions = choose_positions(len, k, rng);
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      rng.shuffle(std::span<std::size_t>(perm));
    } while (std::is_sorted(perm.begin(), perm.end()));
    std::vector<int> out = ids;
    for (std::size_t i = 0; i < k; ++i) out[positions[i]] = ids[positions[perm[i]]];
    if (out != ids) return caption_from_ids(out, vocab, static_cast<int>(caption.ids.size()));
  }
  // repeated tokens kept defeating the shuffle: swap the first distinct pair
  std::vector<int> out = ids;
  for (std::size_t i = 1; i < len; ++i) {
    if (ids[i] != ids[0]) {
      std::swap(out[0], out[i]);
      break;
    }
  }
  return caption_from_ids(out, vocab, static_cast<int>(caption.ids.size()));
}

Caption transform_rw(const Caption& caption, double gamma, const Vocabulary& vocab, std::uint64_t seed) {
  Rng rng(seed);
  return transform_rw(caption, gamma, vocab, rng);
}

Caption transform_rw(const Caption& caption, double gamma, const Vocabulary& vocab, Rng& rng) {
  if (caption.valid_len < 2) throw DataError("random word replacement needs at least two tokens");
  if (vocab.real_size() < 2) throw DataError("random word replacement needs at least two real words");
  const std::size_t k = transform_count(gamma, caption.valid_len);
  const auto real = vocab.real_ids();
  std::vector<int> out(caption.tokens().begin(), caption.tokens().end());
  for (std::size_t pos : choose_positions(out.size(), k, rng)) {
    int word = out[pos];
    while (word == out[pos]) word = real[rng.index(real.size())];
    out[pos] = word;
  }
  return caption_from_ids(out, vocab, static_cast<int>(caption.ids.size()));
}

// ---------------------------------------------------------------------------

BigramModel BigramModel::fit(const Dataset& dataset) {
  std::vector<Caption> refs;
  for (const auto& e : dataset.images) refs.insert(refs.end(), e.references.begin(), e.references.end());
  if (!dataset.vocab) throw ConfigError("dataset has no vocabulary");
  BigramModel m = fit(refs, *dataset.vocab);
  m.vocab_ = dataset.vocab;
  return m;
}

BigramModel BigramModel::fit(std::span<const Caption> captions, const Vocabulary& vocab) {
  BigramModel m;
  m.vocab_ = std::make_shared<const Vocabulary>(vocab);
  m.words_ = vocab.real_ids();
  std::vector<int> slot(vocab.size(), -1);
  for (std::size_t i = 0; i < m.words_.size(); ++i) slot[static_cast<std::size_t>(m.words_[i])] = static_cast<int>(i);
  const std::size_t end = m.words_.size();
  // state 0 is the sentence start; state i + 1 follows word slot i
  m.counts_.assign(m.words_.size() + 1, std::vector<double>(m.words_.size() + 1, 0.0));
  for (const auto& c : captions) {
    std::size_t state = 0;
    for (int id : c.tokens()) {
      const int s = slot[static_cast<std::size_t>(id)];
      if (s < 0) continue;
      m.counts_[state][static_cast<std::size_t>(s)] += 1.0;
      state = static_cast<std::size_t>(s) + 1;
      ++m.total_;
    }
    if (state != 0) m.counts_[state][end] += 1.0;
  }
  return m;
}

Caption BigramModel::sample(Rng& rng, int t_max, bool argmax) const {
  if (empty()) throw ConfigError("Monte Carlo sampling needs a non-empty language model");
  const std::size_t end = words_.size();
  std::vector<int> ids;
  std::size_t state = 0;
  std::vector<double> weights(end + 1);
  while (static_cast<int>(ids.size()) < t_max) {
    const auto& row = counts_[state];
    for (std::size_t o = 0; o <= end; ++o) weights[o] = row[o] + 1.0;
    if (ids.empty()) weights[end] = 0.0;
    std::size_t next = 0;
    if (argmax) {
      next = static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
    } else {
      next = rng.categorical(weights);
    }
    if (next == end) break;
    ids.push_back(words_[next]);
    state = next + 1;
  }
  return caption_from_ids(ids, *vocab_, t_max);
}

Caption mc_sample_caption(const BigramModel& lm, int t_max, std::uint64_t seed, bool argmax) {
  Rng rng(seed);
  return lm.sample(rng, t_max, argmax);
}

// ---------------------------------------------------------------------------

std::string to_string(NegativeSource source) {
  switch (source) {
    case NegativeSource::generator: return "generator";
    case NegativeSource::pathological: return "pathological";
    case NegativeSource::monte_carlo: return "monte_carlo";
  }
  return "?";
}

NegativeMixer NegativeMixer::all_sources() { return NegativeMixer{}; }

NegativeMixer NegativeMixer::generator_only() { return only(NegativeSource::generator); }

NegativeMixer NegativeMixer::only(NegativeSource source) {
  NegativeMixer m;
  m.source_weights = {0.0, 0.0, 0.0};
  m.source_weights[static_cast<std::size_t>(source)] = 1.0;
  return m;
}

NegativeMixer NegativeMixer::rc_only() {
  NegativeMixer m = only(NegativeSource::pathological);
  m.transform_weights = {1.0, 0.0, 0.0};
  return m;
}

void NegativeMixer::validate() const {
  auto check = [](const std::array<double, 3>& w, const char* what) {
    double total = 0.0;
    for (double x : w) {
      if (!(x >= 0.0)) throw ConfigError(std::string(what) + " weights must be non-negative");
      total += x;
    }
    if (!(total > 0.0)) throw ConfigError(std::string("no ") + what + " enabled");
  };
  check(source_weights, "negative source");
  if (enabled(NegativeSource::pathological)) {
    check(transform_weights, "pathological transform");
    if (gamma_grid.empty()) throw ConfigError("empty gamma grid for pathological negatives");
    for (double g : gamma_grid) {
      if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("gamma grid values must lie in [0, 1]");
    }
  }
}

NegativeSampler::NegativeSampler(const Dataset& dataset, NegativeMixer mixer, std::string generator)
    : dataset_(&dataset), mixer_(std::move(mixer)), generator_(std::move(generator)) {
  mixer_.validate();
  if (dataset.size() == 0) throw ConfigError("negative sampling needs a non-empty dataset");
  if (mixer_.enabled(NegativeSource::generator)) {
    if (generator_.empty()) throw ConfigError("generator negatives enabled but no generator named");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      auto it = dataset.images[i].generated.find(generator_);
      if (it != dataset.images[i].generated.end() && !it->second.empty()) generator_images_.push_back(i);
    }
    if (generator_images_.empty()) {
      throw ConfigError("generator negatives enabled but no captions from generator '" + generator_ + "'");
    }
  }
  if (mixer_.enabled(NegativeSource::pathological)) {
    if (mixer_.transform_weights[0] > 0.0) {
      if (dataset.size() < 2) throw ConfigError("RC negatives need at least two images");
      neighbors_.emplace(dataset);
    }
  }
  if (mixer_.enabled(NegativeSource::monte_carlo) ||
      (mixer_.enabled(NegativeSource::pathological) && dataset.size() >= 2)) {
    lm_ = BigramModel::fit(dataset);
    if (mixer_.enabled(NegativeSource::monte_carlo) && lm_.empty()) {
      throw ConfigError("Monte Carlo negatives need reference captions with known words");
    }
  }
}

NegativeSource NegativeSampler::pick_source(Rng& rng) const {
  return static_cast<NegativeSource>(rng.categorical(mixer_.source_weights));
}

LabeledExample NegativeSampler::draw(Rng& rng) const { return draw(rng, pick_source(rng)); }

LabeledExample NegativeSampler::draw(Rng& rng, NegativeSource source) const {
  const Dataset& ds = *dataset_;
  LabeledExample ex;
  ex.label = Label::generated;
  std::size_t image = 0;
  if (source == NegativeSource::generator) {
    image = generator_images_[rng.index(generator_images_.size())];
  } else {
    image = rng.index(ds.size());
  }
  const auto& entry = ds.images[image];
  ex.image = &entry.image;
  const std::size_t context_ref = rng.index(entry.references.size());
  ex.reference = entry.references[context_ref];

  switch (source) {
    case NegativeSource::generator: {
      const auto& gen = entry.generated.at(generator_);
      ex.candidate = gen[rng.index(gen.size())];
      return ex;
    }
    case NegativeSource::monte_carlo:
      ex.candidate = lm_.sample(rng, ds.t_max);
      return ex;
    case NegativeSource::pathological:
      break;
  }

  const auto kind = static_cast<TransformKind>(rng.categorical(mixer_.transform_weights));
  const double gamma = mixer_.gamma_grid[rng.index(mixer_.gamma_grid.size())];
  if (kind == TransformKind::RC) {
    const auto ranked = neighbors_->ranked(image);
    const std::size_t j = ranked[rng.index(neighbors_->pool_size(gamma))];
    const auto& refs = ds.images[j].references;
    ex.candidate = refs[rng.index(refs.size())];
    return ex;
  }
  // transform a reference other than the context one when possible
  std::vector<std::size_t> order(entry.references.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::stable_partition(order.begin(), order.end(), [&](std::size_t r) { return r != context_ref; });
  for (std::size_t r : order) {
    const Caption& src = entry.references[r];
    if (src.valid_len < 2) continue;
    try {
      ex.candidate = kind == TransformKind::WP ? transform_wp(src, gamma, *ds.vocab, rng)
                                               : transform_rw(src, gamma, *ds.vocab, rng);
      return ex;
    } catch (const DataError&) {
      continue;
    }
  }
  // no reference of this image can be transformed this way
  if (neighbors_) {
    const std::size_t j = neighbors_->ranked(image)[rng.index(neighbors_->pool_size(gamma))];
    const auto& refs = ds.images[j].references;
    ex.candidate = refs[rng.index(refs.size())];
  } else {
    ex.candidate = lm_.sample(rng, ds.t_max);
  }
  return ex;
}

LabeledExample draw_negative(const NegativeMixer& mixer, const Dataset& dataset, const std::string& generator,
                             std::uint64_t seed) {
  NegativeSampler sampler(dataset, mixer, generator);
  Rng rng(seed);
  return sampler.draw(rng);
}

}  // namespace capcritic
