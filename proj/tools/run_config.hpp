#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "capcritic/augment.hpp"
#include "capcritic/trainer.hpp"

namespace capcritic::cli {

// Everything a subcommand may read. Defaults first, then the JSON config
// file, then command-line flags.
struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool force = false;
  std::string out_dir = ".";

  std::string captions;
  std::string features;
  std::string vocab;
  std::string embeddings;
  std::string model;
  std::string generator;

  std::size_t max_vocab = 10000;
  std::size_t min_freq = 1;
  int t_max = kDefaultMaxLength;

  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  double lr_decay = 0.9;
  std::string context = "image+caption";
  std::string fusion = "concat_mlp";
  std::size_t embed_dim = 32;
  std::size_t hidden = 64;
  std::size_t layers = 1;
  std::size_t mlp_hidden = 64;
  std::size_t cbp_dim = 1024;
  std::vector<std::string> negatives = {"generator", "rc", "wp", "rw", "mc"};

  std::size_t replicas = 1;
  std::vector<double> gammas = default_grid();
  std::vector<std::string> metrics = {"bleu4", "rougeL", "cider"};
  std::vector<std::string> transforms = {"RC", "WP", "RW"};

  static std::vector<double> default_grid();
};

// Applies a JSON object to cfg. ConfigError on unknown keys or wrong types.
void apply_json(RunConfig& cfg, const std::string& path);

// Known JSON keys, for error messages and docs.
const std::vector<std::string>& config_keys();

NegativeMixer parse_negatives(const std::vector<std::string>& names);
ModelConfig model_config(const RunConfig& cfg, std::size_t image_dim);
TrainConfig train_config(const RunConfig& cfg, std::size_t image_dim);

}  // namespace capcritic::cli
