#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "capcritic/corpus.hpp"
#include "capcritic/critic.hpp"

namespace testing {

inline std::shared_ptr<const capcritic::Vocabulary> small_vocab(std::vector<std::string> words) {
  words.emplace_back(capcritic::Vocabulary::kPad);
  words.emplace_back(capcritic::Vocabulary::kUnk);
  return std::make_shared<const capcritic::Vocabulary>(capcritic::Vocabulary::from_words(std::move(words)));
}

inline capcritic::Dataset tiny_synth(std::size_t n = 12, std::uint64_t seed = 3) {
  capcritic::SynthConfig sc;
  sc.seed = seed;
  sc.n_images = n;
  sc.vocab_size = 40;
  sc.image_dim = 8;
  sc.n_topics = 3;
  return capcritic::synth_dataset(sc);
}

inline capcritic::ModelConfig tiny_model(const capcritic::Vocabulary& v, std::size_t image_dim) {
  capcritic::ModelConfig m;
  m.vocab_size = v.size();
  m.vocab_hash = v.hash();
  m.embed_dim = 4;
  m.hidden = 5;
  m.image_dim = image_dim;
  m.fusion.mlp_hidden = 6;
  m.fusion.cbp_dim = 16;
  m.seed = 11;
  return m;
}

// Scratch directory removed on scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("capcritic_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testing
