#include "capcritic/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "capcritic/error.hpp"
#include "capcritic/rng.hpp"

namespace capcritic {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  Vocabulary vocab;
  vocab.words_ = std::move(words);
  for (std::size_t i = 0; i < vocab.words_.size(); ++i) {
    const auto& w = vocab.words_[i];
    if (w.empty()) throw DataError("vocabulary line " + std::to_string(i + 1) + " is empty");
    if (!vocab.index_.emplace(w, static_cast<int>(i)).second) {
      throw DataError("duplicate vocabulary word '" + w + "' at line " + std::to_string(i + 1));
    }
  }
  auto pad = vocab.index_.find(std::string(kPad));
  auto unk = vocab.index_.find(std::string(kUnk));
  if (pad == vocab.index_.end() || unk == vocab.index_.end()) {
    throw DataError("vocabulary must contain <pad> and <unk>");
  }
  vocab.pad_id_ = pad->second;
  vocab.unk_id_ = unk->second;
  return vocab;
}

int Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? unk_id_ : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.contains(std::string(word));
}

std::vector<int> Vocabulary::real_ids() const {
  std::vector<int> ids;
  ids.reserve(real_size());
  for (int i = 0; i < static_cast<int>(words_.size()); ++i) {
    if (is_real(i)) ids.push_back(i);
  }
  return ids;
}

std::uint64_t Vocabulary::hash() const {
  std::string joined;
  for (const auto& w : words_) {
    joined += w;
    joined += '\n';
  }
  return stable_hash(joined);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : text) {
    char c = raw;
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'';
    if (keep) {
      current += c;
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

Vocabulary build_vocabulary(std::span<const std::string> captions, std::size_t max_vocab,
                            std::size_t min_freq) {
  if (captions.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& text : captions) {
    for (auto& tok : tokenize(text)) ++counts[tok];
  }
  if (counts.empty()) throw DataError("cannot build a vocabulary: the corpus contains no words");
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [word, n] : counts) {
    if (n >= min_freq && word != Vocabulary::kPad && word != Vocabulary::kUnk) {
      ranked.emplace_back(word, n);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_vocab) ranked.resize(max_vocab);
  std::vector<std::string> words;
  words.reserve(ranked.size() + 2);
  for (auto& [w, n] : ranked) words.push_back(w);
  words.emplace_back(Vocabulary::kPad);
  words.emplace_back(Vocabulary::kUnk);
  return Vocabulary::from_words(std::move(words));
}

Vocabulary read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(line);
  }
  return Vocabulary::from_words(std::move(words));
}

void write_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (const auto& w : vocab.words()) out << w << '\n';
}

// ---------------------------------------------------------------------------
// Captions

Caption encode_caption(std::span<const std::string> tokens, const Vocabulary& vocab, int t_max) {
  if (t_max < 1) throw ConfigError("t_max must be >= 1");
  if (tokens.empty()) throw DataError("a caption must contain at least one token");
  Caption caption;
  caption.valid_len = static_cast<int>(std::min<std::size_t>(tokens.size(), static_cast<std::size_t>(t_max)));
  caption.ids.assign(static_cast<std::size_t>(t_max), vocab.pad_id());
  for (int t = 0; t < caption.valid_len; ++t) {
    caption.ids[static_cast<std::size_t>(t)] = vocab.id(tokens[static_cast<std::size_t>(t)]);
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) caption.text += ' ';
    caption.text += tokens[i];
  }
  return caption;
}

Caption encode_text(std::string_view text, const Vocabulary& vocab, int t_max) {
  const auto tokens = tokenize(text);
  Caption caption = encode_caption(tokens, vocab, t_max);
  caption.text = std::string(text);
  return caption;
}

Caption caption_from_ids(std::span<const int> ids, const Vocabulary& vocab, int t_max) {
  if (t_max < 1) throw ConfigError("t_max must be >= 1");
  if (ids.empty()) throw DataError("a caption must contain at least one token");
  Caption caption;
  caption.valid_len = static_cast<int>(std::min<std::size_t>(ids.size(), static_cast<std::size_t>(t_max)));
  caption.ids.assign(static_cast<std::size_t>(t_max), vocab.pad_id());
  for (int t = 0; t < caption.valid_len; ++t) {
    const int id = ids[static_cast<std::size_t>(t)];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
      throw DataError("token id " + std::to_string(id) + " outside the vocabulary");
    }
    caption.ids[static_cast<std::size_t>(t)] = id;
    if (t) caption.text += ' ';
    caption.text += vocab.word(id);
  }
  return caption;
}

std::vector<std::string> decode_caption(const Caption& caption, const Vocabulary& vocab) {
  std::vector<std::string> words;
  for (int id : caption.tokens()) words.push_back(vocab.word(id));
  return words;
}

// ---------------------------------------------------------------------------
// Dataset

std::size_t Dataset::reference_count() const {
  std::size_t n = 0;
  for (const auto& e : images) n += e.references.size();
  return n;
}

bool Dataset::has_generator(std::string_view name) const {
  for (const auto& e : images) {
    auto it = e.generated.find(std::string(name));
    if (it != e.generated.end() && !it->second.empty()) return true;
  }
  return false;
}

std::vector<std::string> Dataset::generator_names() const {
  std::set<std::string> names;
  for (const auto& e : images) {
    for (const auto& [name, caps] : e.generated) names.insert(name);
  }
  return {names.begin(), names.end()};
}

std::vector<std::string> Dataset::reference_texts() const {
  std::vector<std::string> texts;
  for (const auto& e : images) {
    for (const auto& c : e.references) texts.push_back(c.text);
  }
  return texts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.vocab = vocab;
  out.t_max = t_max;
  out.images.reserve(indices.size());
  for (std::size_t i : indices) out.images.push_back(images.at(i));
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  if (t_max != other.t_max || images != other.images) return false;
  if (!vocab || !other.vocab) return vocab == other.vocab;
  return *vocab == *other.vocab;
}

// ---------------------------------------------------------------------------
// Binary helpers (little-endian on disk)

namespace {

constexpr char kFeatureMagic[4] = {'C', 'F', 'V', '1'};

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return value;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_f32(std::ostream& out, float v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("truncated features file while reading " + what);
  return to_little(v);
}

float get_f32(std::istream& in, const std::string& what) {
  float v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("truncated features file while reading " + what);
  return to_little(v);
}

}  // namespace

FeatureTable read_features(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open features file: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw DataError("features file " + path + " does not start with CFV1");
  }
  FeatureTable table;
  const std::uint32_t count = get_u32(in, "record count");
  table.dim = get_u32(in, "dimension");
  table.ids.reserve(count);
  table.features.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::string where = "record " + std::to_string(r);
    const std::uint32_t len = get_u32(in, where + " id length");
    std::string id(len, '\0');
    if (len && !in.read(id.data(), len)) throw DataError("truncated features file in " + where + " id");
    std::vector<double> feature(table.dim);
    for (auto& x : feature) {
      const float f = get_f32(in, "feature of image '" + id + "'");
      if (!std::isfinite(f)) throw DataError("non-finite feature value for image '" + id + "'");
      x = f;
    }
    table.ids.push_back(std::move(id));
    table.features.push_back(std::move(feature));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("features file " + path + " has trailing bytes (dimension mismatch?)");
  }
  return table;
}

void write_features(const FeatureTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write features file: " + path);
  out.write(kFeatureMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(table.ids.size()));
  put_u32(out, static_cast<std::uint32_t>(table.dim));
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    if (table.features[r].size() != table.dim) {
      throw DataError("dimension mismatch for image '" + table.ids[r] + "'");
    }
    put_u32(out, static_cast<std::uint32_t>(table.ids[r].size()));
    out.write(table.ids[r].data(), static_cast<std::streamsize>(table.ids[r].size()));
    for (double x : table.features[r]) put_f32(out, static_cast<float>(x));
  }
}

namespace {

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open captions file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("malformed captions file " + path + ": " + e.what());
  }
}

std::vector<std::string> string_list(const json& node, const std::string& where) {
  if (!node.is_array()) throw DataError(where + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& item : node) {
    if (!item.is_string()) throw DataError(where + " must be a list of strings");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

std::vector<std::string> read_reference_texts(const std::string& captions_path) {
  const json doc = parse_json_file(captions_path);
  if (!doc.is_array()) throw DataError("captions file must contain a JSON list");
  std::vector<std::string> texts;
  std::size_t index = 0;
  for (const auto& rec : doc) {
    const std::string where = "record " + std::to_string(index++);
    if (!rec.is_object() || !rec.contains("references")) throw DataError(where + ": missing references");
    for (auto& t : string_list(rec["references"], where + " references")) texts.push_back(std::move(t));
  }
  return texts;
}

Dataset load_dataset(const std::string& captions_path, const std::string& features_path,
                     std::shared_ptr<const Vocabulary> vocab, int t_max, std::size_t expected_dim) {
  if (!vocab) throw ConfigError("load_dataset requires a vocabulary");
  const json doc = parse_json_file(captions_path);
  if (!doc.is_array()) throw DataError("captions file must contain a JSON list");
  const FeatureTable table = read_features(features_path);
  if (expected_dim != 0 && table.dim != expected_dim) {
    throw DataError("dimension mismatch: features have dimension " + std::to_string(table.dim) +
                    ", expected " + std::to_string(expected_dim));
  }
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t r = 0; r < table.ids.size(); ++r) by_id.emplace(table.ids[r], r);

  Dataset dataset;
  dataset.vocab = vocab;
  dataset.t_max = t_max;
  std::set<std::string> seen;
  std::size_t index = 0;
  for (const auto& rec : doc) {
    const std::string where = "record " + std::to_string(index++);
    if (!rec.is_object()) throw DataError(where + " is not an object");
    if (!rec.contains("image_id") || !rec["image_id"].is_string()) {
      throw DataError(where + ": missing string image_id");
    }
    ImageEntry entry;
    entry.image.id = rec["image_id"].get<std::string>();
    const std::string who = "image '" + entry.image.id + "'";
    if (!seen.insert(entry.image.id).second) throw DataError("duplicate " + who);
    auto feat = by_id.find(entry.image.id);
    if (feat == by_id.end()) throw DataError("dangling reference: no feature vector for " + who);
    entry.image.feature = table.features[feat->second];

    if (!rec.contains("references")) throw DataError(who + " has no references");
    for (const auto& text : string_list(rec["references"], who + " references")) {
      if (tokenize(text).empty()) throw DataError(who + " has an empty reference caption");
      entry.references.push_back(encode_text(text, *vocab, t_max));
    }
    if (entry.references.empty()) throw DataError(who + " has no references");

    if (rec.contains("generated")) {
      const auto& gen = rec["generated"];
      if (!gen.is_object()) throw DataError(who + ": generated must be an object");
      for (auto it = gen.begin(); it != gen.end(); ++it) {
        auto& list = entry.generated[it.key()];
        for (const auto& text : string_list(it.value(), who + " generated." + it.key())) {
          if (tokenize(text).empty()) throw DataError(who + " has an empty generated caption");
          list.push_back(encode_text(text, *vocab, t_max));
        }
      }
    }
    dataset.images.push_back(std::move(entry));
  }
  return dataset;
}

void write_dataset(const Dataset& dataset, const std::string& captions_path,
                   const std::string& features_path) {
  json doc = json::array();
  FeatureTable table;
  table.dim = dataset.feature_dim();
  for (const auto& e : dataset.images) {
    json rec;
    rec["image_id"] = e.image.id;
    json refs = json::array();
    for (const auto& c : e.references) refs.push_back(c.text);
    rec["references"] = std::move(refs);
    if (!e.generated.empty()) {
      json gen = json::object();
      for (const auto& [name, caps] : e.generated) {
        json list = json::array();
        for (const auto& c : caps) list.push_back(c.text);
        gen[name] = std::move(list);
      }
      rec["generated"] = std::move(gen);
    }
    doc.push_back(std::move(rec));
    table.ids.push_back(e.image.id);
    table.features.push_back(e.image.feature);
  }
  std::ofstream out(captions_path, std::ios::binary);
  if (!out) throw DataError("cannot write captions file: " + captions_path);
  out << doc.dump(1) << '\n';
  write_features(table, features_path);
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

enum WordClass { kNoun = 0, kVerb, kAdjective, kPlace, kClassCount };

// generated captions stick to a few frequent words per topic
constexpr std::size_t kDegradedKeepPercent = 10;
constexpr double kDegradedSharpen = 3.0;

struct SynthLexicon {
  std::array<std::vector<std::string>, kClassCount> words;
};

SynthLexicon make_lexicon(std::size_t vocab_size) {
  static constexpr const char* kStems[kClassCount] = {"obj", "act", "adj", "loc"};
  const std::array<double, kClassCount> share = {0.3, 0.2, 0.2, 0.3};
  SynthLexicon lex;
  std::size_t assigned = 0;
  for (int c = 0; c < kClassCount; ++c) {
    std::size_t n = (c == kClassCount - 1)
                        ? vocab_size - assigned
                        : std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(share[c] * static_cast<double>(vocab_size))));
    assigned += n;
    for (std::size_t i = 0; i < n; ++i) lex.words[c].push_back(std::string(kStems[c]) + std::to_string(i));
  }
  return lex;
}

// Per-topic, per-class word weights: Zipf over a topic-specific ranking.
struct TopicModel {
  std::array<std::vector<double>, kClassCount> human;
  std::array<std::vector<double>, kClassCount> degraded;
};

TopicModel make_topic(const SynthLexicon& lex, Rng& rng) {
  TopicModel topic;
  for (int c = 0; c < kClassCount; ++c) {
    const std::size_t n = lex.words[c].size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    topic.human[c].assign(n, 0.0);
    topic.degraded[c].assign(n, 0.0);
    const std::size_t keep = std::max<std::size_t>(2, (n * kDegradedKeepPercent + 99) / 100);
    for (std::size_t rank = 0; rank < n; ++rank) {
      const double w = 1.0 / std::pow(static_cast<double>(rank + 1), 1.1);
      topic.human[c][order[rank]] = w;
      if (rank < keep) topic.degraded[c][order[rank]] = std::pow(w, kDegradedSharpen);
    }
  }
  return topic;
}

struct Template {
  double adjective_prob;
  double second_adjective_prob;
  double with_clause_prob;
};

std::vector<std::string> sample_sentence(const SynthLexicon& lex,
                                         const std::array<std::vector<double>, kClassCount>& weights,
                                         const std::array<std::vector<double>, kClassCount>& noun_weights,
                                         const Template& tpl, const std::string* noun, const std::string* place,
                                         const std::string* attribute, Rng& rng) {
  static constexpr const char* kDeterminers[] = {"a", "the"};
  static constexpr const char* kPrepositions[] = {"on", "in", "near"};
  auto pick = [&](int cls, const std::array<std::vector<double>, kClassCount>& w) {
    return lex.words[cls][rng.categorical(w[cls])];
  };
  std::vector<std::string> s;
  s.emplace_back(kDeterminers[rng.index(2)]);
  if (rng.uniform() < tpl.adjective_prob) s.push_back(attribute ? *attribute : pick(kAdjective, weights));
  s.push_back(noun ? *noun : pick(kNoun, noun_weights));
  s.emplace_back("is");
  s.push_back(pick(kVerb, weights));
  s.emplace_back(kPrepositions[rng.index(3)]);
  s.emplace_back(kDeterminers[rng.index(2)]);
  if (rng.uniform() < tpl.second_adjective_prob) s.push_back(pick(kAdjective, weights));
  s.push_back(place ? *place : pick(kPlace, weights));
  if (rng.uniform() < tpl.with_clause_prob) {
    s.emplace_back("with");
    s.emplace_back(kDeterminers[rng.index(2)]);
    s.push_back(pick(kNoun, weights));
  }
  return s;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

}  // namespace

Dataset synth_dataset(const SynthConfig& config) {
  if (config.n_images < 2) throw ConfigError("synth_dataset needs at least 2 images");
  if (config.vocab_size < 20) throw ConfigError("synth_dataset needs vocab_size >= 20");
  if (config.image_dim < 1 || config.n_topics < 1 || config.refs_per_image < 1) {
    throw ConfigError("synth_dataset: image_dim, n_topics and refs_per_image must be positive");
  }
  Rng rng(derive_seed(config.seed, 0x5e7));
  const SynthLexicon lex = make_lexicon(config.vocab_size);

  std::vector<TopicModel> topics;
  std::vector<std::vector<double>> centroids;
  for (std::size_t k = 0; k < config.n_topics; ++k) {
    topics.push_back(make_topic(lex, rng));
    std::vector<double> c(config.image_dim);
    for (auto& x : c) x = rng.normal();
    centroids.push_back(std::move(c));
  }

  const Template human_tpl{0.9, 0.6, 0.5};
  const Template generated_tpl{0.05, 0.0, 0.0};
  // humans mostly name the image's own object and place; the generator
  // recognizes them less often and otherwise falls back on frequent words
  constexpr double kHumanObjectProb = 0.95;
  constexpr double kHumanPlaceProb = 0.8;
  constexpr double kGeneratorObjectProb = 0.5;
  constexpr double kGeneratorPlaceProb = 0.3;
  constexpr double kWrongTopicProb = 0.3;
  constexpr double kFeatureNoise = 0.6;
  constexpr double kHumanAttributeProb = 0.8;
  constexpr double kObjectSignal = 0.8;
  constexpr double kPlaceSignal = 0.5;

  auto random_vectors = [&](std::size_t n) {
    std::vector<std::vector<double>> out(n, std::vector<double>(config.image_dim));
    for (auto& v : out) {
      for (auto& x : v) x = rng.normal();
    }
    return out;
  };
  const auto object_vectors = random_vectors(lex.words[kNoun].size());
  const auto place_vectors = random_vectors(lex.words[kPlace].size());

  std::vector<std::vector<std::vector<std::string>>> refs(config.n_images);
  std::vector<std::vector<std::vector<std::string>>> gens(config.n_images);
  Dataset dataset;
  dataset.t_max = config.t_max;
  dataset.images.resize(config.n_images);
  for (std::size_t i = 0; i < config.n_images; ++i) {
    const std::size_t k = rng.index(config.n_topics);
    const std::size_t object = rng.categorical(topics[k].human[kNoun]);
    const std::string& object_word = lex.words[kNoun][object];
    const std::size_t place = rng.categorical(topics[k].human[kPlace]);
    const std::string& place_word = lex.words[kPlace][place];
    const std::string& attribute_word = lex.words[kAdjective][rng.categorical(topics[k].human[kAdjective])];
    auto& entry = dataset.images[i];
    char id[32];
    std::snprintf(id, sizeof id, "img%05zu", i);
    entry.image.id = id;
    entry.image.feature.resize(config.image_dim);
    for (std::size_t d = 0; d < config.image_dim; ++d) {
      const double x = centroids[k][d] + kObjectSignal * object_vectors[object][d] +
                       kPlaceSignal * place_vectors[place][d] + kFeatureNoise * rng.normal();
      // stored as f32 on disk; keep the in-memory value exactly representable
      entry.image.feature[d] = static_cast<float>(x);
    }
    for (std::size_t r = 0; r < config.refs_per_image; ++r) {
      const std::string* noun = rng.uniform() < kHumanObjectProb ? &object_word : nullptr;
      const std::string* where = rng.uniform() < kHumanPlaceProb ? &place_word : nullptr;
      const std::string* attribute = rng.uniform() < kHumanAttributeProb ? &attribute_word : nullptr;
      refs[i].push_back(sample_sentence(lex, topics[k].human, topics[k].human, human_tpl, noun, where, attribute, rng));
    }
    for (std::size_t g = 0; g < config.generated_per_image; ++g) {
      const std::size_t noun_topic = rng.uniform() < kWrongTopicProb ? rng.index(config.n_topics) : k;
      const std::string* noun = rng.uniform() < kGeneratorObjectProb ? &object_word : nullptr;
      const std::string* where = rng.uniform() < kGeneratorPlaceProb ? &place_word : nullptr;
      gens[i].push_back(
          sample_sentence(lex, topics[k].degraded, topics[noun_topic].degraded, generated_tpl, noun, where, nullptr, rng));
    }
  }

  std::vector<std::string> texts;
  for (const auto& per_image : refs) {
    for (const auto& words : per_image) texts.push_back(join_words(words));
  }
  auto vocab = std::make_shared<const Vocabulary>(build_vocabulary(texts, 10000, 1));
  dataset.vocab = vocab;
  for (std::size_t i = 0; i < config.n_images; ++i) {
    auto& entry = dataset.images[i];
    for (const auto& words : refs[i]) {
      Caption c = encode_caption(words, *vocab, config.t_max);
      entry.references.push_back(std::move(c));
    }
    if (config.generated_per_image > 0) {
      auto& list = entry.generated[config.generator_name];
      for (const auto& words : gens[i]) list.push_back(encode_caption(words, *vocab, config.t_max));
    }
  }
  return dataset;
}

}  // namespace capcritic
