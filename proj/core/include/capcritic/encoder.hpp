#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capcritic/corpus.hpp"
#include "capcritic/diffcore.hpp"

namespace capcritic {

// Which information conditions a score besides the candidate caption.
enum class ContextMode { none, image, caption, image_caption };

std::string to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view text);
inline bool uses_image(ContextMode m) { return m == ContextMode::image || m == ContextMode::image_caption; }
inline bool uses_caption(ContextMode m) { return m == ContextMode::caption || m == ContextMode::image_caption; }

struct EmbeddingTable {
  Parameter table;  // vocab_size x dim
  int pad_id = -1;

  std::size_t dim() const { return table.value.cols; }
};

// uniform(-0.05, 0.05) rows, PAD row zero.
EmbeddingTable make_embedding_table(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

// Text file, one "word x1 ... xd" entry per line. Words found in the
// vocabulary take the file's vector; everything else is random as in
// make_embedding_table. Throws DataError when a vector's length is not dim.
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab, std::size_t dim,
                               std::uint64_t seed);

// Gate columns are laid out [input | forget | output | candidate].
struct LstmLayerParams {
  Parameter input_weights;      // in x 4H
  Parameter recurrent_weights;  // H x 4H
  Parameter bias;               // 1 x 4H
};

struct LstmParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::vector<LstmLayerParams> layers;
};

// Weights uniform(-0.08, 0.08); biases zero except the forget gate at 1.
LstmParams make_lstm(std::size_t input_dim, std::size_t hidden, std::size_t layers, std::uint64_t seed);

struct ImageProjection {
  Parameter weight;  // image_dim x H
  Parameter bias;    // 1 x H
};

ImageProjection make_image_projection(std::size_t image_dim, std::size_t hidden, std::uint64_t seed);

struct EncoderParams {
  ContextMode mode = ContextMode::image_caption;
  EmbeddingTable embeddings;
  LstmParams lstm;
  std::optional<ImageProjection> projection;  // present iff mode uses the image

  std::size_t hidden() const { return lstm.hidden; }
  std::size_t context_dim() const;
  void append_parameters(std::vector<Parameter*>& out);
};

// Parameters bound to a tape for one forward pass.
struct BoundLstmLayer {
  Var input_weights;
  Var recurrent_weights;
  Var bias;
};

struct BoundProjection {
  Var weight;
  Var bias;
};

struct BoundEncoder {
  ContextMode mode = ContextMode::none;
  Var embedding;
  std::vector<BoundLstmLayer> layers;
  std::optional<BoundProjection> projection;
  int pad_id = -1;
  std::size_t hidden = 0;
};

BoundEncoder bind_encoder(Tape& tape, EncoderParams& params);

struct LstmState {
  Var h;
  Var c;
};

// One cell update for a batch: x [B, in], state [B, H] each.
LstmState lstm_step(Tape& tape, Var x, LstmState state, const BoundLstmLayer& layer, std::size_t hidden);

// Runs the stacked LSTM over each caption from a zero state and returns the
// top-layer hidden state after the last valid token, [B, H]. Steps past a
// caption's valid length leave its state untouched.
Var encode_sequences(Tape& tape, const BoundEncoder& enc, std::span<const Caption* const> captions);

// Concatenation of the present context parts in order [image, reference].
// images / reference_encodings must be present exactly when the mode uses
// them (ConfigError otherwise). Mode none yields a [rows, 0] tensor.
Var encode_context(Tape& tape, const BoundEncoder& enc, std::span<const ImageRecord* const> images,
                   std::optional<Var> reference_encodings, std::size_t rows);

// Single-caption convenience wrappers without gradient tracking.
std::vector<double> encode_sequence(EncoderParams& params, const Caption& caption);
std::vector<double> encode_context(EncoderParams& params, const ImageRecord* image, const Caption* reference);

}  // namespace capcritic
