#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capcritic/corpus.hpp"
#include "capcritic/critic.hpp"
#include "capcritic/rng.hpp"

namespace capcritic {

enum class TransformKind { RC, WP, RW };

std::string to_string(TransformKind kind);
TransformKind parse_transform_kind(std::string_view text);

struct TransformSpec {
  TransformKind kind = TransformKind::WP;
  double gamma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Number of positions touched by WP / RW for a caption of valid_len tokens:
// round-half-up of gamma * valid_len, floored at 2 (and capped at valid_len).
std::size_t transform_count(double gamma, int valid_len);

// Images ranked by cosine similarity of their features, most similar first.
class NeighborIndex {
 public:
  explicit NeighborIndex(const Dataset& dataset);

  std::span<const std::size_t> ranked(std::size_t image) const { return ranked_[image]; }
  // ceil(gamma * (n - 1)), at least 1.
  std::size_t pool_size(double gamma) const;

 private:
  std::vector<std::vector<std::size_t>> ranked_;
};

struct TransformedPair {
  std::size_t image = 0;         // image the caption is now paired with
  std::size_t source_image = 0;  // image the caption was written for
  std::size_t source_ref = 0;
  Caption caption;
};

// One pair per image: a reference of a neighbor drawn uniformly from the
// gamma-nearest pool. Throws DataError for fewer than two images.
std::vector<TransformedPair> transform_rc(const Dataset& dataset, double gamma, std::uint64_t seed);
std::vector<TransformedPair> transform_rc(const Dataset& dataset, const NeighborIndex& index, double gamma,
                                          std::uint64_t seed);

// Permutes transform_count(gamma) distinct valid positions so the token
// sequence changes. DataError when valid_len < 2 or no distinct arrangement
// of the chosen tokens exists.
Caption transform_wp(const Caption& caption, double gamma, const Vocabulary& vocab, std::uint64_t seed);
Caption transform_wp(const Caption& caption, double gamma, const Vocabulary& vocab, Rng& rng);

// Replaces transform_count(gamma) distinct valid positions with random real
// words, each different from the word it replaces.
Caption transform_rw(const Caption& caption, double gamma, const Vocabulary& vocab, std::uint64_t seed);
Caption transform_rw(const Caption& caption, double gamma, const Vocabulary& vocab, Rng& rng);

// Bigram language model with add-one smoothing over real words plus an end
// token, fit on reference captions.
class BigramModel {
 public:
  BigramModel() = default;
  static BigramModel fit(const Dataset& dataset);
  static BigramModel fit(std::span<const Caption> captions, const Vocabulary& vocab);

  bool empty() const { return total_ == 0; }
  // Samples until the end token or t_max tokens. The first token is never
  // the end token. argmax=true follows the most likely successor instead.
  Caption sample(Rng& rng, int t_max, bool argmax = false) const;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<int> words_;                     // sampleable ids (real words)
  std::vector<std::vector<double>> counts_;    // [prev state][word index or end]
  std::size_t total_ = 0;
};

Caption mc_sample_caption(const BigramModel& lm, int t_max, std::uint64_t seed, bool argmax = false);

enum class NegativeSource { generator, pathological, monte_carlo };

std::string to_string(NegativeSource source);

struct NegativeMixer {
  // Weight per source; zero disables it.
  std::array<double, 3> source_weights = {1.0, 1.0, 1.0};
  // Weight per transform within the pathological source (RC, WP, RW).
  std::array<double, 3> transform_weights = {1.0, 1.0, 1.0};
  std::vector<double> gamma_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};

  static NegativeMixer all_sources();
  static NegativeMixer generator_only();
  static NegativeMixer only(NegativeSource source);
  static NegativeMixer rc_only();

  bool enabled(NegativeSource s) const { return source_weights[static_cast<std::size_t>(s)] > 0.0; }
  void validate() const;
};

// Draws labeled negatives from one dataset. Context (image and a reference)
// always comes from the image the negative is attached to.
class NegativeSampler {
 public:
  // generator may be empty when the generator source is disabled. Throws
  // ConfigError when an enabled source has no data.
  NegativeSampler(const Dataset& dataset, NegativeMixer mixer, std::string generator);

  LabeledExample draw(Rng& rng) const;
  LabeledExample draw(Rng& rng, NegativeSource source) const;
  NegativeSource pick_source(Rng& rng) const;

  const NegativeMixer& mixer() const { return mixer_; }

 private:
  const Dataset* dataset_;
  NegativeMixer mixer_;
  std::string generator_;
  std::vector<std::size_t> generator_images_;
  std::optional<NeighborIndex> neighbors_;
  BigramModel lm_;
};

LabeledExample draw_negative(const NegativeMixer& mixer, const Dataset& dataset, const std::string& generator,
                             std::uint64_t seed);

}  // namespace capcritic
