#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>

#include <json.hpp>

#include "capcritic/error.hpp"
#include "capcritic/evalstats.hpp"

namespace capcritic::cli {

using json = nlohmann::json;

std::vector<double> RunConfig::default_grid() { return default_gamma_grid(); }

namespace {

using Setter = std::function<void(RunConfig&, const json&)>;

template <typename T>
Setter set(T RunConfig::*field) {
  return [field](RunConfig& c, const json& v) { c.*field = v.get<T>(); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", set(&RunConfig::seed)},
      {"threads", set(&RunConfig::threads)},
      {"force", set(&RunConfig::force)},
      {"out_dir", set(&RunConfig::out_dir)},
      {"captions", set(&RunConfig::captions)},
      {"features", set(&RunConfig::features)},
      {"vocab", set(&RunConfig::vocab)},
      {"embeddings", set(&RunConfig::embeddings)},
      {"model", set(&RunConfig::model)},
      {"generator", set(&RunConfig::generator)},
      {"max_vocab", set(&RunConfig::max_vocab)},
      {"min_freq", set(&RunConfig::min_freq)},
      {"t_max", set(&RunConfig::t_max)},
      {"batch_size", set(&RunConfig::batch_size)},
      {"epochs", set(&RunConfig::epochs)},
      {"learning_rate", set(&RunConfig::learning_rate)},
      {"lr_decay", set(&RunConfig::lr_decay)},
      {"context", set(&RunConfig::context)},
      {"fusion", set(&RunConfig::fusion)},
      {"embed_dim", set(&RunConfig::embed_dim)},
      {"hidden", set(&RunConfig::hidden)},
      {"layers", set(&RunConfig::layers)},
      {"mlp_hidden", set(&RunConfig::mlp_hidden)},
      {"cbp_dim", set(&RunConfig::cbp_dim)},
      {"negatives", set(&RunConfig::negatives)},
      {"replicas", set(&RunConfig::replicas)},
      {"gammas", set(&RunConfig::gammas)},
      {"metrics", set(&RunConfig::metrics)},
      {"transforms", set(&RunConfig::transforms)},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, s] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_json(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown config key '" + key + "' in " + path);
    try {
      it->second(cfg, value);
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "' has the wrong type: " + e.what());
    }
  }
}

NegativeMixer parse_negatives(const std::vector<std::string>& names) {
  NegativeMixer m;
  m.source_weights = {0.0, 0.0, 0.0};
  m.transform_weights = {0.0, 0.0, 0.0};
  for (const auto& n : names) {
    if (n == "all") return NegativeMixer::all_sources();
    if (n == "generator") {
      m.source_weights[0] = 1.0;
    } else if (n == "mc") {
      m.source_weights[2] = 1.0;
    } else {
      const auto kind = parse_transform_kind(n);
      m.source_weights[1] = 1.0;
      m.transform_weights[static_cast<std::size_t>(kind)] = 1.0;
    }
  }
  if (m.source_weights[1] == 0.0) m.transform_weights = {1.0, 1.0, 1.0};
  m.validate();
  return m;
}

ModelConfig model_config(const RunConfig& cfg, std::size_t image_dim) {
  ModelConfig m;
  m.embed_dim = cfg.embed_dim;
  m.hidden = cfg.hidden;
  m.layers = cfg.layers;
  m.image_dim = image_dim;
  m.t_max = cfg.t_max;
  m.context = parse_context_mode(cfg.context);
  m.fusion.strategy = parse_fusion_strategy(cfg.fusion);
  m.fusion.mlp_hidden = cfg.mlp_hidden;
  m.fusion.cbp_dim = cfg.cbp_dim;
  return m;
}

TrainConfig train_config(const RunConfig& cfg, std::size_t image_dim) {
  TrainConfig t;
  t.batch_size = cfg.batch_size;
  t.epochs = cfg.epochs;
  t.learning_rate = cfg.learning_rate;
  t.lr_decay = cfg.lr_decay;
  t.seed = cfg.seed;
  t.mixer = parse_negatives(cfg.negatives);
  t.generator = cfg.generator;
  t.model = model_config(cfg, image_dim);
  t.embeddings_path = cfg.embeddings;
  t.mixer.gamma_grid.clear();
  for (double g : cfg.gammas) {
    if (g > 0.0) t.mixer.gamma_grid.push_back(g);
  }
  if (t.mixer.gamma_grid.empty()) t.mixer.gamma_grid = cfg.gammas;
  t.validate();
  return t;
}

}  // namespace capcritic::cli
