#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace capcritic {

inline constexpr int kDefaultMaxLength = 15;

// Word <-> id mapping. Real words occupy ids [0, real_size()), followed by
// the padding and unknown-word tokens.
class Vocabulary {
 public:
  static constexpr std::string_view kPad = "<pad>";
  static constexpr std::string_view kUnk = "<unk>";

  Vocabulary() = default;

  // Builds from an ordered word list that contains both special tokens
  // exactly once. Throws DataError otherwise.
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  std::size_t real_size() const { return words_.size() - 2; }
  int pad_id() const { return pad_id_; }
  int unk_id() const { return unk_id_; }

  // Id of a word, or unk_id() when absent.
  int id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& words() const { return words_; }

  // Real (non-special) word ids in id order.
  std::vector<int> real_ids() const;
  bool is_real(int id) const { return id != pad_id_ && id != unk_id_; }

  // Stable digest of the id assignment; embedded in model files.
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
  int pad_id_ = -1;
  int unk_id_ = -1;
};

// Lowercases, maps anything outside [a-z0-9'] to a space, splits on spaces.
std::vector<std::string> tokenize(std::string_view text);

// Keeps words with frequency >= min_freq, ordered by (frequency desc,
// word asc), truncated to max_vocab; then appends <pad> and <unk>.
// Throws DataError on an empty corpus.
Vocabulary build_vocabulary(std::span<const std::string> captions, std::size_t max_vocab,
                            std::size_t min_freq);

Vocabulary read_vocabulary(const std::string& path);
void write_vocabulary(const Vocabulary& vocab, const std::string& path);

// A caption as fixed-length token ids. Positions >= valid_len hold PAD.
struct Caption {
  std::string text;
  std::vector<int> ids;
  int valid_len = 0;

  std::span<const int> tokens() const {
    return std::span<const int>(ids).first(static_cast<std::size_t>(valid_len));
  }
  bool operator==(const Caption&) const = default;
};

// Throws DataError if tokens is empty, ConfigError if t_max < 1.
Caption encode_caption(std::span<const std::string> tokens, const Vocabulary& vocab,
                       int t_max = kDefaultMaxLength);

// Convenience: tokenize + encode, keeping the raw text.
Caption encode_text(std::string_view text, const Vocabulary& vocab,
                    int t_max = kDefaultMaxLength);

// Builds a caption directly from ids (text rendered from the vocabulary).
Caption caption_from_ids(std::span<const int> ids, const Vocabulary& vocab,
                         int t_max = kDefaultMaxLength);

// Words of the valid region; unknown words come back as "<unk>".
std::vector<std::string> decode_caption(const Caption& caption, const Vocabulary& vocab);

struct ImageRecord {
  std::string id;
  std::vector<double> feature;

  bool operator==(const ImageRecord&) const = default;
};

struct ImageEntry {
  ImageRecord image;
  std::vector<Caption> references;
  std::map<std::string, std::vector<Caption>> generated;

  bool operator==(const ImageEntry&) const = default;
};

struct Dataset {
  std::shared_ptr<const Vocabulary> vocab;
  int t_max = kDefaultMaxLength;
  std::vector<ImageEntry> images;

  std::size_t size() const { return images.size(); }
  std::size_t feature_dim() const { return images.empty() ? 0 : images.front().image.feature.size(); }
  std::size_t reference_count() const;
  bool has_generator(std::string_view name) const;
  std::vector<std::string> generator_names() const;
  std::vector<std::string> reference_texts() const;

  // Copy restricted to the given image indices, in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset& other) const;
};

// Features file ("CFV1"): id -> feature vector, stored as f32 little-endian.
struct FeatureTable {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<double>> features;
};

FeatureTable read_features(const std::string& path);
void write_features(const FeatureTable& table, const std::string& path);

// Joins a captions JSON file with a features file. If expected_dim is
// non-zero, every feature must have that dimension. Throws DataError naming
// the offending image id or location.
Dataset load_dataset(const std::string& captions_path, const std::string& features_path,
                     std::shared_ptr<const Vocabulary> vocab, int t_max = kDefaultMaxLength,
                     std::size_t expected_dim = 0);

// Reads only the reference texts of a captions file (for vocabulary building).
std::vector<std::string> read_reference_texts(const std::string& captions_path);

void write_dataset(const Dataset& dataset, const std::string& captions_path,
                   const std::string& features_path);

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t n_images = 200;
  std::size_t vocab_size = 200;  // distinct content words
  std::size_t image_dim = 64;
  std::size_t n_topics = 8;
  std::size_t refs_per_image = 5;
  std::size_t generated_per_image = 5;
  std::string generator_name = "synth";
  int t_max = kDefaultMaxLength;
};

// Topic-structured toy corpus. Each image belongs to a latent topic that
// shapes both its feature vector and the words of its captions; "generated"
// captions come from a truncated, flattened version of the same word
// distributions and use simpler sentence templates.
Dataset synth_dataset(const SynthConfig& config);

}  // namespace capcritic
