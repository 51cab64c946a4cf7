#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capcritic/augment.hpp"
#include "capcritic/corpus.hpp"
#include "capcritic/critic.hpp"
#include "capcritic/rng.hpp"

namespace capcritic {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  double lr_decay = 0.9;
  AdamConfig adam;
  std::uint64_t seed = 0;
  NegativeMixer mixer;
  std::string generator;  // source of generator negatives; empty disables that source
  ModelConfig model = desk_model_config();
  std::string embeddings_path;

  void validate() const;
};

// Same as TrainConfig{} but with the shorter schedule used when a critic is
// trained per submission.
TrainConfig generator_eval_preset();

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t t = 0;

  static AdamState for_parameters(std::span<Parameter* const> params);
};

// Bias-corrected Adam on flat arrays; step is the 1-based update count.
void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 std::size_t step, double lr, const AdamConfig& config);

// One step over every trainable parameter, using parameter.grad.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr, const AdamConfig& config);

// batch_size / 2 human pairs followed by batch_size / 2 sampled negatives.
// A human pair uses one reference as context and a different one as the
// candidate when the image has at least two.
std::vector<LabeledExample> make_batch(const Dataset& dataset, const NegativeSampler& sampler,
                                       std::size_t batch_size, Rng& rng);
std::vector<LabeledExample> make_batch(const Dataset& dataset, const NegativeMixer& mixer,
                                       const std::string& generator, std::size_t batch_size, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double lr = 0.0;  // rate used during this epoch
  std::optional<double> val_human_mean;
  std::optional<double> val_generated_mean;
};

struct TrainResult {
  CriticModel model;
  std::vector<EpochRecord> history;
};

std::size_t batches_per_epoch(const Dataset& dataset, std::size_t batch_size);

// When validation is given (and has captions from config.generator, or any
// reference when the generator is unset), per-epoch mean scores of its human
// and generated captions are recorded.
TrainResult train(const Dataset& dataset, const TrainConfig& config, const Dataset* validation = nullptr);

void write_history(std::span<const EpochRecord> history, const std::string& path);

// 0 or 1, from the parity of the image id's stable hash.
int fold_of(std::string_view image_id);

struct FoldScore {
  std::size_t image = 0;    // index into the scored dataset
  std::size_t caption = 0;  // index among the generator's captions for that image
  double score = 0.0;       // mean over replicas
};

struct FoldAudit {
  std::size_t replica = 0;
  int scored_fold = 0;
  std::vector<std::string> training_images;
  std::vector<std::string> scored_images;
};

struct TwoFoldResult {
  std::vector<FoldScore> scores;  // dataset order, then caption order
  double mean_score = 0.0;
  std::vector<FoldAudit> audit;
};

// Trains on one fold and scores the generator's captions on the other, both
// ways, for each of `replicas` seeds. Jobs run on up to `threads` threads;
// the result does not depend on the thread count.
TwoFoldResult two_fold_score(const Dataset& dataset, const std::string& generator, const TrainConfig& config,
                             std::size_t replicas = 1, std::size_t threads = 1);

}  // namespace capcritic
