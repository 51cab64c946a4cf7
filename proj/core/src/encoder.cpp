#include "capcritic/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "capcritic/error.hpp"
#include "capcritic/rng.hpp"

namespace capcritic {

std::string to_string(ContextMode mode) {
  switch (mode) {
    case ContextMode::none: return "none";
    case ContextMode::image: return "image";
    case ContextMode::caption: return "caption";
    case ContextMode::image_caption: return "image+caption";
  }
  return "?";
}

ContextMode parse_context_mode(std::string_view text) {
  if (text == "none") return ContextMode::none;
  if (text == "image") return ContextMode::image;
  if (text == "caption") return ContextMode::caption;
  if (text == "image+caption" || text == "image_caption") return ContextMode::image_caption;
  throw ConfigError("unknown context mode '" + std::string(text) + "'");
}

namespace {

Tensor uniform_tensor(std::size_t rows, std::size_t cols, double limit, Rng& rng) {
  Tensor t(rows, cols);
  for (auto& x : t.data) x = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

EmbeddingTable make_embedding_table(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xe3b));
  EmbeddingTable emb;
  emb.pad_id = vocab.pad_id();
  emb.table = Parameter("embedding", uniform_tensor(vocab.size(), dim, 0.05, rng));
  for (auto& x : emb.table.value.row_span(static_cast<std::size_t>(emb.pad_id))) x = 0.0;
  return emb;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab, std::size_t dim,
                               std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path);
  EmbeddingTable emb = make_embedding_table(vocab, dim, seed);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> values;
    double x = 0.0;
    while (fields >> x) values.push_back(x);
    if (!fields.eof()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (values.size() != dim) {
      throw DataError(path + ":" + std::to_string(line_no) + ": embedding dimension " +
                      std::to_string(values.size()) + " does not match configured " + std::to_string(dim));
    }
    if (!vocab.contains(word)) continue;
    const int id = vocab.id(word);
    if (!vocab.is_real(id)) continue;
    std::copy(values.begin(), values.end(), emb.table.value.row_span(static_cast<std::size_t>(id)).begin());
  }
  return emb;
}

LstmParams make_lstm(std::size_t input_dim, std::size_t hidden, std::size_t layers, std::uint64_t seed) {
  if (layers < 1) throw ConfigError("LSTM needs at least one layer");
  Rng rng(derive_seed(seed, 0x157));
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden = hidden;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input_dim : hidden;
    const std::string prefix = "lstm" + std::to_string(l) + ".";
    LstmLayerParams layer{
        Parameter(prefix + "input_weights", uniform_tensor(in, 4 * hidden, 0.08, rng)),
        Parameter(prefix + "recurrent_weights", uniform_tensor(hidden, 4 * hidden, 0.08, rng)),
        Parameter(prefix + "bias", Tensor(1, 4 * hidden)),
    };
    for (std::size_t c = hidden; c < 2 * hidden; ++c) layer.bias.value.data[c] = 1.0;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

ImageProjection make_image_projection(std::size_t image_dim, std::size_t hidden, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1a9));
  return ImageProjection{
      Parameter("image_projection.weight", uniform_tensor(image_dim, hidden, 0.08, rng)),
      Parameter("image_projection.bias", Tensor(1, hidden)),
  };
}

std::size_t EncoderParams::context_dim() const {
  std::size_t dim = 0;
  if (uses_image(mode)) dim += hidden();
  if (uses_caption(mode)) dim += hidden();
  return dim;
}

void EncoderParams::append_parameters(std::vector<Parameter*>& out) {
  out.push_back(&embeddings.table);
  for (auto& layer : lstm.layers) {
    out.push_back(&layer.input_weights);
    out.push_back(&layer.recurrent_weights);
    out.push_back(&layer.bias);
  }
  if (projection) {
    out.push_back(&projection->weight);
    out.push_back(&projection->bias);
  }
}

BoundEncoder bind_encoder(Tape& tape, EncoderParams& params) {
  if (uses_image(params.mode) != params.projection.has_value()) {
    throw ConfigError("image projection must be present exactly when the context uses the image");
  }
  BoundEncoder enc;
  enc.mode = params.mode;
  enc.embedding = tape.param(params.embeddings.table);
  enc.pad_id = params.embeddings.pad_id;
  enc.hidden = params.lstm.hidden;
  for (auto& layer : params.lstm.layers) {
    enc.layers.push_back({tape.param(layer.input_weights), tape.param(layer.recurrent_weights), tape.param(layer.bias)});
  }
  if (params.projection) {
    enc.projection = BoundProjection{tape.param(params.projection->weight), tape.param(params.projection->bias)};
  }
  return enc;
}

LstmState lstm_step(Tape& tape, Var x, LstmState state, const BoundLstmLayer& layer, std::size_t hidden) {
  const Tensor& xv = tape.value(x);
  const Tensor& hv = tape.value(state.h);
  const Tensor& wx = tape.value(layer.input_weights);
  if (xv.cols != wx.rows || hv.cols != hidden || wx.cols != 4 * hidden || xv.rows != hv.rows) {
    throw ShapeError("lstm_step: input " + xv.shape_string() + ", state " + hv.shape_string() +
                     ", input weights " + wx.shape_string());
  }
  Var z = tape.add_row(tape.add(tape.matmul(x, layer.input_weights), tape.matmul(state.h, layer.recurrent_weights)),
                       layer.bias);
  Var gates = tape.sigmoid(tape.slice(z, 0, 3 * hidden));
  Var input_gate = tape.slice(gates, 0, hidden);
  Var forget_gate = tape.slice(gates, hidden, 2 * hidden);
  Var output_gate = tape.slice(gates, 2 * hidden, 3 * hidden);
  Var candidate = tape.tanh(tape.slice(z, 3 * hidden, 4 * hidden));
  Var c = tape.add(tape.mul(forget_gate, state.c), tape.mul(input_gate, candidate));
  Var h = tape.mul(output_gate, tape.tanh(c));
  return {h, c};
}

Var encode_sequences(Tape& tape, const BoundEncoder& enc, std::span<const Caption* const> captions) {
  const std::size_t batch = captions.size();
  if (batch == 0) throw ShapeError("encode_sequences: empty batch");
  int max_len = 0;
  for (const Caption* c : captions) {
    if (c->valid_len < 1 || static_cast<std::size_t>(c->valid_len) > c->ids.size()) {
      throw DataError("encode_sequences: caption '" + c->text + "' has invalid length");
    }
    max_len = std::max(max_len, c->valid_len);
  }
  std::vector<LstmState> states;
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    states.push_back({tape.constant(Tensor(batch, enc.hidden)), tape.constant(Tensor(batch, enc.hidden))});
  }
  std::vector<int> ids(batch);
  std::vector<std::uint8_t> keep(batch);
  // steps at or beyond every caption's valid length would leave all states
  // unchanged, so the loop stops at the longest valid length
  for (int t = 0; t < max_len; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      ids[b] = captions[b]->ids[static_cast<std::size_t>(t)];
      keep[b] = t < captions[b]->valid_len ? 1 : 0;
    }
    Var input = tape.lookup(enc.embedding, ids, enc.pad_id);
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
      LstmState next = lstm_step(tape, input, states[l], enc.layers[l], enc.hidden);
      states[l].h = tape.select_rows(keep, next.h, states[l].h);
      states[l].c = tape.select_rows(keep, next.c, states[l].c);
      input = states[l].h;
    }
  }
  return states.back().h;
}

Var encode_context(Tape& tape, const BoundEncoder& enc, std::span<const ImageRecord* const> images,
                   std::optional<Var> reference_encodings, std::size_t rows) {
  std::vector<Var> parts;
  if (uses_image(enc.mode)) {
    if (images.size() != rows) throw ConfigError("context mode " + to_string(enc.mode) + " requires an image per example");
    const Tensor& w = tape.value(enc.projection->weight);
    Tensor features(rows, w.rows);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!images[r]) throw ConfigError("context mode " + to_string(enc.mode) + " requires an image per example");
      if (images[r]->feature.size() != w.rows) {
        throw ShapeError("image '" + images[r]->id + "' has feature dimension " +
                         std::to_string(images[r]->feature.size()) + ", model expects " + std::to_string(w.rows));
      }
      std::copy(images[r]->feature.begin(), images[r]->feature.end(), features.row_span(r).begin());
    }
    Var projected = tape.add_row(tape.matmul(tape.constant(std::move(features)), enc.projection->weight),
                                 enc.projection->bias);
    parts.push_back(projected);
  } else {
    for (const ImageRecord* img : images) {
      if (img) throw ConfigError("context mode " + to_string(enc.mode) + " takes no image");
    }
  }
  if (uses_caption(enc.mode)) {
    if (!reference_encodings) throw ConfigError("context mode " + to_string(enc.mode) + " requires a reference caption");
    parts.push_back(*reference_encodings);
  } else if (reference_encodings) {
    throw ConfigError("context mode " + to_string(enc.mode) + " takes no reference caption");
  }
  if (parts.empty()) return tape.constant(Tensor(rows, 0));
  if (parts.size() == 1) return parts.front();
  return tape.concat(parts);
}

std::vector<double> encode_sequence(EncoderParams& params, const Caption& caption) {
  Tape tape;
  BoundEncoder enc = bind_encoder(tape, params);
  const Caption* one[] = {&caption};
  const Tensor& out = tape.value(encode_sequences(tape, enc, one));
  return out.data;
}

std::vector<double> encode_context(EncoderParams& params, const ImageRecord* image, const Caption* reference) {
  Tape tape;
  BoundEncoder enc = bind_encoder(tape, params);
  std::optional<Var> ref;
  if (reference) {
    const Caption* one[] = {reference};
    ref = encode_sequences(tape, enc, one);
  }
  std::vector<const ImageRecord*> images;
  if (image) images.push_back(image);
  return tape.value(encode_context(tape, enc, images, ref, 1)).data;
}

}  // namespace capcritic
