#include "capcritic/critic.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "capcritic/error.hpp"
#include "capcritic/rng.hpp"

namespace capcritic {

using nlohmann::json;

std::string to_string(Label label) { return label == Label::human ? "human" : "generated"; }

void ModelConfig::validate() const {
  if (vocab_size < 3) throw ConfigError("model vocabulary must hold at least one real word");
  if (embed_dim == 0 || hidden == 0 || image_dim == 0) throw ConfigError("model dimensions must be positive");
  if (layers < 1 || layers > 3) throw ConfigError("LSTM layer count must be 1, 2 or 3");
  if (t_max < 1) throw ConfigError("t_max must be >= 1");
  fusion.validate();
  if (fusion.strategy == FusionStrategy::cbp_linear && context == ContextMode::none) {
    throw ConfigError("compact bilinear pooling requires a non-empty context");
  }
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  return vocab_size == o.vocab_size && vocab_hash == o.vocab_hash && embed_dim == o.embed_dim &&
         hidden == o.hidden && layers == o.layers && image_dim == o.image_dim && t_max == o.t_max &&
         context == o.context && fusion.strategy == o.fusion.strategy && fusion.mlp_hidden == o.fusion.mlp_hidden &&
         fusion.cbp_dim == o.fusion.cbp_dim && fusion.cbp_normalize == o.fusion.cbp_normalize && seed == o.seed;
}

ModelConfig desk_model_config() {
  ModelConfig c;
  c.embed_dim = 32;
  c.hidden = 64;
  c.image_dim = 64;
  c.fusion.mlp_hidden = 64;
  c.fusion.cbp_dim = 1024;
  return c;
}

std::vector<Parameter*> CriticModel::parameters() {
  std::vector<Parameter*> out;
  encoder.append_parameters(out);
  fusion.append_parameters(out);
  out.push_back(&classifier_weight);
  out.push_back(&classifier_bias);
  return out;
}

std::size_t CriticModel::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->value.size();
  return n;
}

namespace {

CriticModel make_skeleton(const ModelConfig& config, EmbeddingTable embeddings) {
  config.validate();
  CriticModel m;
  m.config = config;
  m.encoder.mode = config.context;
  m.encoder.embeddings = std::move(embeddings);
  m.encoder.lstm = make_lstm(config.embed_dim, config.hidden, config.layers, config.seed);
  if (uses_image(config.context)) {
    m.encoder.projection = make_image_projection(config.image_dim, config.hidden, config.seed);
  }
  m.fusion = make_fusion(config.fusion, m.encoder.context_dim(), config.hidden, config.seed);
  Rng rng(derive_seed(config.seed, 0xc1a));
  Tensor w(m.fusion.output_dim(), 2);
  for (auto& x : w.data) x = rng.uniform(-0.08, 0.08);
  m.classifier_weight = Parameter("classifier.weight", std::move(w));
  m.classifier_bias = Parameter("classifier.bias", Tensor(1, 2));
  return m;
}

}  // namespace

CriticModel make_model(const ModelConfig& config, const Vocabulary& vocab, const std::string& embeddings_path) {
  ModelConfig c = config;
  c.vocab_size = vocab.size();
  c.vocab_hash = vocab.hash();
  c.validate();
  EmbeddingTable emb = embeddings_path.empty() ? make_embedding_table(vocab, c.embed_dim, c.seed)
                                               : load_embeddings(embeddings_path, vocab, c.embed_dim, c.seed);
  return make_skeleton(c, std::move(emb));
}

Var forward_logits(Tape& tape, CriticModel& model, std::span<const ExampleView> batch) {
  if (batch.empty()) throw ShapeError("forward_logits: empty batch");
  const ContextMode mode = model.config.context;
  const std::size_t n = batch.size();
  std::vector<const Caption*> captions;
  std::vector<const ImageRecord*> images;
  captions.reserve(2 * n);
  for (const auto& ex : batch) {
    if (!ex.candidate) throw ConfigError("example without a candidate caption");
    captions.push_back(ex.candidate);
  }
  for (const auto& ex : batch) {
    if (uses_caption(mode)) {
      if (!ex.reference) throw ConfigError("context mode " + to_string(mode) + " requires a reference caption");
      captions.push_back(ex.reference);
    }
    if (uses_image(mode)) {
      if (!ex.image) throw ConfigError("context mode " + to_string(mode) + " requires an image");
      images.push_back(ex.image);
    }
  }
  BoundEncoder enc = bind_encoder(tape, model.encoder);
  BoundFusion fus = bind_fusion(tape, model.fusion);
  Var w = tape.param(model.classifier_weight);
  Var b = tape.param(model.classifier_bias);

  // candidate and reference captions share the LSTM, so they run as one batch
  Var encoded = encode_sequences(tape, enc, captions);
  Var candidate = tape.slice_rows(encoded, 0, n);
  std::optional<Var> reference;
  if (uses_caption(mode)) reference = tape.slice_rows(encoded, n, 2 * n);
  Var context = encode_context(tape, enc, images, reference, n);
  Var fused = fuse(tape, model.fusion, fus, context, candidate);
  return tape.add_row(tape.matmul(fused, w), b);
}

std::vector<double> score_batch(CriticModel& model, std::span<const ExampleView> batch) {
  constexpr std::size_t kChunk = 256;
  std::vector<double> out;
  out.reserve(batch.size());
  for (std::size_t start = 0; start < batch.size(); start += kChunk) {
    const auto chunk = batch.subspan(start, std::min(kChunk, batch.size() - start));
    Tape tape;
    const Tensor p = softmax_rows(tape.value(forward_logits(tape, model, chunk)));
    for (std::size_t r = 0; r < p.rows; ++r) out.push_back(p.at(r, kHumanClass));
  }
  return out;
}

double score(CriticModel& model, const ImageRecord* image, const Caption* reference, const Caption& candidate) {
  const ExampleView one[] = {{image, reference, &candidate}};
  return score_batch(model, one).front();
}

double score_with_all_references(CriticModel& model, const ImageRecord* image,
                                 std::span<const Caption> references, const Caption& candidate) {
  if (references.empty()) throw ConfigError("score_with_all_references needs at least one reference");
  if (!uses_caption(model.config.context)) return score(model, image, nullptr, candidate);
  std::vector<ExampleView> views;
  for (const auto& ref : references) views.push_back({image, &ref, &candidate});
  const auto scores = score_batch(model, views);
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(scores.size());
}

Var build_loss(Tape& tape, CriticModel& model, std::span<const LabeledExample> batch) {
  if (batch.empty()) throw ConfigError("loss: empty batch");
  std::vector<ExampleView> views;
  views.reserve(batch.size());
  Tensor labels(batch.size(), 2);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    views.push_back(batch[r].view());
    labels.at(r, batch[r].label == Label::human ? kHumanClass : kGeneratedClass) = 1.0;
  }
  Var logits = forward_logits(tape, model, views);
  return tape.softmax_cross_entropy(logits, labels);
}

double loss(CriticModel& model, std::span<const LabeledExample> batch) {
  Tape tape;
  return tape.value(build_loss(tape, model, batch)).data[0];
}

double loss_and_gradients(CriticModel& model, std::span<const LabeledExample> batch) {
  for (Parameter* p : model.parameters()) p->zero_grad();
  Tape tape;
  Var l = build_loss(tape, model, batch);
  tape.backward(l);
  return tape.value(l).data[0];
}

// ---------------------------------------------------------------------------
// Model file

namespace {

constexpr char kModelMagic[4] = {'C', 'R', 'T', '1'};
constexpr int kModelVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  std::size_t used = 0;
  const unsigned long long v = std::stoull(s, &used, 16);
  if (used != s.size()) throw DataError("malformed hash '" + s + "' in model file");
  return v;
}

template <typename T>
T little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

json config_to_json(CriticModel& model) {
  const ModelConfig& c = model.config;
  json j;
  j["version"] = kModelVersion;
  j["vocab_size"] = c.vocab_size;
  j["vocab_hash"] = hex64(c.vocab_hash);
  j["pad_id"] = model.encoder.embeddings.pad_id;
  j["embed_dim"] = c.embed_dim;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["image_dim"] = c.image_dim;
  j["t_max"] = c.t_max;
  j["context"] = to_string(c.context);
  j["fusion"] = {{"strategy", to_string(c.fusion.strategy)},
                 {"mlp_hidden", c.fusion.mlp_hidden},
                 {"cbp_dim", c.fusion.cbp_dim},
                 {"cbp_normalize", c.fusion.cbp_normalize}};
  j["seed"] = hex64(c.seed);
  json params = json::array();
  for (Parameter* p : model.parameters()) {
    params.push_back({{"name", p->name}, {"rows", p->value.rows}, {"cols", p->value.cols}});
  }
  j["parameters"] = std::move(params);
  return j;
}

}  // namespace

void save_model(CriticModel& model, const std::string& path) {
  const std::string header = config_to_json(model).dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  out.write(kModelMagic, 4);
  const std::uint32_t len = little(static_cast<std::uint32_t>(header.size()));
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (Parameter* p : model.parameters()) {
    for (double x : p->value.data) {
      const double v = little(x);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  if (!out) throw DataError("failed writing model file: " + path);
}

CriticModel load_model(const std::string& path, const Vocabulary* vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw DataError("model file " + path + " does not start with CRT1");
  }
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len)) throw DataError("truncated model file: " + path);
  len = little(len);
  std::string header(len, '\0');
  if (!in.read(header.data(), len)) throw DataError("truncated model file header: " + path);

  json j;
  ModelConfig c;
  int pad_id = -1;
  try {
    j = json::parse(header);
    if (j.at("version").get<int>() != kModelVersion) {
      throw DataError("unsupported model file version " + std::to_string(j.at("version").get<int>()));
    }
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.vocab_hash = parse_hex64(j.at("vocab_hash").get<std::string>());
    pad_id = j.at("pad_id").get<int>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.image_dim = j.at("image_dim").get<std::size_t>();
    c.t_max = j.at("t_max").get<int>();
    c.context = parse_context_mode(j.at("context").get<std::string>());
    const auto& f = j.at("fusion");
    c.fusion.strategy = parse_fusion_strategy(f.at("strategy").get<std::string>());
    c.fusion.mlp_hidden = f.at("mlp_hidden").get<std::size_t>();
    c.fusion.cbp_dim = f.at("cbp_dim").get<std::size_t>();
    c.fusion.cbp_normalize = f.at("cbp_normalize").get<bool>();
    c.seed = parse_hex64(j.at("seed").get<std::string>());
  } catch (const json::exception& e) {
    throw DataError("malformed model header in " + path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("invalid model header in " + path + ": " + e.what());
  }

  if (vocab) {
    if (vocab->size() != c.vocab_size) {
      throw ShapeError("model expects a vocabulary of " + std::to_string(c.vocab_size) + " words, got " +
                       std::to_string(vocab->size()));
    }
    if (vocab->hash() != c.vocab_hash) throw DataError("vocabulary does not match the one the model was trained with");
  }
  if (pad_id < 0 || static_cast<std::size_t>(pad_id) >= c.vocab_size) throw DataError("model file has an invalid pad id");

  EmbeddingTable emb;
  emb.pad_id = pad_id;
  emb.table = Parameter("embedding", Tensor(c.vocab_size, c.embed_dim));
  CriticModel model = make_skeleton(c, std::move(emb));

  const auto params = model.parameters();
  try {
    const auto& listed = j.at("parameters");
    if (listed.size() != params.size()) throw ShapeError("model file lists " + std::to_string(listed.size()) + " parameters, architecture has " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto rows = listed[i].at("rows").get<std::size_t>();
      const auto cols = listed[i].at("cols").get<std::size_t>();
      if (listed[i].at("name").get<std::string>() != params[i]->name || rows != params[i]->value.rows ||
          cols != params[i]->value.cols) {
        throw ShapeError("model parameter " + std::to_string(i) + " (" + params[i]->name + ") has shape [" +
                         std::to_string(rows) + "x" + std::to_string(cols) + "], expected " +
                         params[i]->value.shape_string());
      }
    }
  } catch (const json::exception& e) {
    throw DataError("malformed parameter list in " + path + ": " + e.what());
  }
  for (Parameter* p : params) {
    for (auto& x : p->value.data) {
      double v = 0.0;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
        throw DataError("truncated model file: parameter " + p->name + " is incomplete");
      }
      x = little(v);
    }
    p->zero_grad();
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("model file " + path + " has trailing bytes");
  return model;
}

}  // namespace capcritic
