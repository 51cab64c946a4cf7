#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capcritic/corpus.hpp"
#include "capcritic/diffcore.hpp"
#include "capcritic/encoder.hpp"
#include "capcritic/fusion.hpp"

namespace capcritic {

enum class Label { human, generated };

// Column of each class in the classifier output.
inline constexpr std::size_t kHumanClass = 0;
inline constexpr std::size_t kGeneratedClass = 1;

std::string to_string(Label label);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::uint64_t vocab_hash = 0;
  std::size_t embed_dim = 300;
  std::size_t hidden = 512;
  std::size_t layers = 1;
  std::size_t image_dim = 2048;
  int t_max = kDefaultMaxLength;
  ContextMode context = ContextMode::image_caption;
  FusionConfig fusion;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig& other) const;
};

// Dimensions small enough to train in seconds on one core.
ModelConfig desk_model_config();

struct CriticModel {
  ModelConfig config;
  EncoderParams encoder;
  FusionParams fusion;
  Parameter classifier_weight;  // fused_dim x 2
  Parameter classifier_bias;    // 1 x 2

  // Every trainable tensor, in the fixed order used by the model file.
  std::vector<Parameter*> parameters();
  std::size_t parameter_count();
};

// Randomly initialized model for the given vocabulary. When embeddings_path
// is non-empty, word vectors are loaded from it.
CriticModel make_model(const ModelConfig& config, const Vocabulary& vocab,
                       const std::string& embeddings_path = {});

// One scoring or training input. Pointers are non-owning.
struct ExampleView {
  const ImageRecord* image = nullptr;
  const Caption* reference = nullptr;
  const Caption* candidate = nullptr;
};

struct LabeledExample {
  const ImageRecord* image = nullptr;  // owned by the dataset
  std::optional<Caption> reference;
  Caption candidate;
  Label label = Label::human;

  ExampleView view() const { return {image, reference ? &*reference : nullptr, &candidate}; }
};

// Builds the forward pass for a batch and returns logits [B, 2]. Context
// presence must match the model's context mode (ConfigError otherwise).
Var forward_logits(Tape& tape, CriticModel& model, std::span<const ExampleView> batch);

// Probability that the candidate is human-written.
double score(CriticModel& model, const ImageRecord* image, const Caption* reference, const Caption& candidate);
std::vector<double> score_batch(CriticModel& model, std::span<const ExampleView> batch);

// Mean score over every reference used as context. Collapses to one call
// when the model does not read a reference caption.
double score_with_all_references(CriticModel& model, const ImageRecord* image,
                                 std::span<const Caption> references, const Caption& candidate);

// Mean cross-entropy of a batch.
double loss(CriticModel& model, std::span<const LabeledExample> batch);
// Same, and fills every parameter's grad (zeroed first).
double loss_and_gradients(CriticModel& model, std::span<const LabeledExample> batch);
Var build_loss(Tape& tape, CriticModel& model, std::span<const LabeledExample> batch);

// Model file: "CRT1", u32 config length, JSON config, raw f64 parameters.
void save_model(CriticModel& model, const std::string& path);
// When vocab is given its size and digest must match the file: a size
// difference raises ShapeError, a different digest raises DataError.
CriticModel load_model(const std::string& path, const Vocabulary* vocab = nullptr);

}  // namespace capcritic
