#include "capcritic/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "capcritic/csv.hpp"
#include "capcritic/error.hpp"

namespace capcritic {

void TrainConfig::validate() const {
  if (batch_size < 2 || batch_size % 2 != 0) throw ConfigError("batch size must be even and at least 2");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(lr_decay > 0.0)) throw ConfigError("learning-rate decay must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
  mixer.validate();
  model.fusion.validate();
  if (model.fusion.strategy == FusionStrategy::cbp_linear && model.context == ContextMode::none) {
    throw ConfigError("compact bilinear pooling requires a non-empty context");
  }
}

TrainConfig generator_eval_preset() {
  TrainConfig c;
  c.epochs = 10;
  return c;
}

AdamState AdamState::for_parameters(std::span<Parameter* const> params) {
  AdamState s;
  for (const Parameter* p : params) {
    s.m.emplace_back(p->value.rows, p->value.cols);
    s.v.emplace_back(p->value.rows, p->value.cols);
  }
  return s;
}

void adam_update(std::span<double> value, std::span<const double> grad, std::span<double> m, std::span<double> v,
                 std::size_t step, double lr, const AdamConfig& config) {
  if (grad.size() != value.size() || m.size() != value.size() || v.size() != value.size()) {
    throw ShapeError("adam_update: value, gradient and moment sizes differ");
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
    const double mh = m[i] / c1;
    const double vh = v[i] / c2;
    value[i] -= lr * mh / (std::sqrt(vh) + config.eps);
  }
}

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr, const AdamConfig& config) {
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  ++state.t;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.trainable) continue;
    if (p.grad.data.size() != p.value.data.size()) throw ShapeError("adam_step: gradient of " + p.name + " has wrong size");
    adam_update(p.value.data, p.grad.data, state.m[i].data, state.v[i].data, state.t, lr, config);
  }
}

std::vector<LabeledExample> make_batch(const Dataset& dataset, const NegativeSampler& sampler,
                                       std::size_t batch_size, Rng& rng) {
  if (dataset.size() == 0) throw ConfigError("cannot build a batch from an empty dataset");
  std::vector<LabeledExample> batch;
  batch.reserve(batch_size);
  const std::size_t half = batch_size / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const auto& entry = dataset.images[rng.index(dataset.size())];
    const std::size_t n = entry.references.size();
    const std::size_t ctx = rng.index(n);
    std::size_t cand = ctx;
    // single-reference images reuse it as both context and candidate
    if (n >= 2) cand = (ctx + 1 + rng.index(n - 1)) % n;
    LabeledExample ex;
    ex.image = &entry.image;
    ex.reference = entry.references[ctx];
    ex.candidate = entry.references[cand];
    ex.label = Label::human;
    batch.push_back(std::move(ex));
  }
  for (std::size_t k = 0; k < half; ++k) batch.push_back(sampler.draw(rng));
  return batch;
}

std::vector<LabeledExample> make_batch(const Dataset& dataset, const NegativeMixer& mixer,
                                       const std::string& generator, std::size_t batch_size, std::uint64_t seed) {
  NegativeSampler sampler(dataset, mixer, generator);
  Rng rng(seed);
  return make_batch(dataset, sampler, batch_size, rng);
}

std::size_t batches_per_epoch(const Dataset& dataset, std::size_t batch_size) {
  const std::size_t half = batch_size / 2;
  return std::max<std::size_t>(1, (dataset.reference_count() + half - 1) / half);
}

namespace {

struct ValidationSet {
  std::vector<LabeledExample> human;
  std::vector<LabeledExample> generated;
};

ValidationSet validation_pairs(const Dataset& ds, const std::string& generator) {
  ValidationSet v;
  for (const auto& e : ds.images) {
    if (e.references.size() >= 2) {
      v.human.push_back({&e.image, e.references[0], e.references[1], Label::human});
    }
    if (generator.empty()) continue;
    auto it = e.generated.find(generator);
    if (it != e.generated.end() && !it->second.empty() && !e.references.empty()) {
      v.generated.push_back({&e.image, e.references[0], it->second.front(), Label::generated});
    }
  }
  return v;
}

std::optional<double> mean_score(CriticModel& model, const std::vector<LabeledExample>& pairs) {
  if (pairs.empty()) return std::nullopt;
  std::vector<ExampleView> views;
  for (const auto& p : pairs) views.push_back(p.view());
  const auto s = score_batch(model, views);
  double total = 0.0;
  for (double x : s) total += x;
  return total / static_cast<double>(s.size());
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& config, const Dataset* validation) {
  config.validate();
  if (dataset.size() == 0) throw ConfigError("training needs a non-empty dataset");
  if (!dataset.vocab) throw ConfigError("training dataset has no vocabulary");
  if (dataset.feature_dim() != config.model.image_dim && uses_image(config.model.context)) {
    throw ShapeError("dataset features have dimension " + std::to_string(dataset.feature_dim()) +
                     ", model expects " + std::to_string(config.model.image_dim));
  }

  NegativeMixer mixer = config.mixer;
  if (config.generator.empty()) {
    mixer.source_weights[static_cast<std::size_t>(NegativeSource::generator)] = 0.0;
    mixer.validate();
  }
  const NegativeSampler sampler(dataset, mixer, config.generator);

  ModelConfig mc = config.model;
  mc.t_max = dataset.t_max;
  mc.seed = derive_seed(config.seed, 0x6d6f64656cULL);
  TrainResult result{make_model(mc, *dataset.vocab, config.embeddings_path), {}};
  CriticModel& model = result.model;
  const auto params = model.parameters();
  AdamState state = AdamState::for_parameters(params);

  std::optional<ValidationSet> val;
  if (validation) val = validation_pairs(*validation, config.generator);

  const std::size_t steps = batches_per_epoch(dataset, config.batch_size);
  double lr = config.learning_rate;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    double total = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto batch = make_batch(dataset, sampler, config.batch_size, rng);
      total += loss_and_gradients(model, batch);
      adam_step(params, state, lr, config.adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = total / static_cast<double>(steps);
    rec.lr = lr;
    if (val) {
      rec.val_human_mean = mean_score(model, val->human);
      rec.val_generated_mean = mean_score(model, val->generated);
    }
    result.history.push_back(rec);
    lr *= config.lr_decay;
  }
  return result;
}

void write_history(std::span<const EpochRecord> history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history file: " + path);
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
  csv::write_row(out, {"epoch", "mean_loss", "lr", "val_human_mean", "val_generated_mean"});
  for (const auto& r : history) {
    csv::write_row(out, {std::to_string(r.epoch), csv::format_double(r.mean_loss), csv::format_double(r.lr),
                         opt(r.val_human_mean), opt(r.val_generated_mean)});
  }
  if (!out) throw DataError("failed writing history file: " + path);
}

int fold_of(std::string_view image_id) { return static_cast<int>(stable_hash(image_id) & 1U); }

TwoFoldResult two_fold_score(const Dataset& dataset, const std::string& generator, const TrainConfig& config,
                             std::size_t replicas, std::size_t threads) {
  if (generator.empty()) throw ConfigError("two-fold scoring needs a generator name");
  if (!dataset.has_generator(generator)) throw DataError("dataset has no captions from generator '" + generator + "'");
  if (replicas == 0) throw ConfigError("replica count must be positive");
  config.validate();

  std::vector<std::size_t> folds[2];
  for (std::size_t i = 0; i < dataset.size(); ++i) folds[fold_of(dataset.images[i].image.id)].push_back(i);
  if (folds[0].empty() || folds[1].empty()) throw DataError("two-fold split left one fold empty");

  struct Job {
    std::size_t replica;
    int scored_fold;
    std::vector<double> scores;  // aligned with the scored fold's generator captions
    FoldAudit audit;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < replicas; ++r) {
    for (int f = 0; f < 2; ++f) jobs.push_back({r, f, {}, {}});
  }

  auto run = [&](Job& job) {
    const auto& train_idx = folds[1 - job.scored_fold];
    const auto& score_idx = folds[job.scored_fold];
    const Dataset train_set = dataset.subset(train_idx);
    TrainConfig tc = config;
    tc.generator = generator;
    tc.seed = derive_seed(derive_seed(config.seed, 0x7265706cULL + job.replica), static_cast<std::uint64_t>(job.scored_fold));
    TrainResult trained = train(train_set, tc);

    job.audit.replica = job.replica;
    job.audit.scored_fold = job.scored_fold;
    for (const auto& e : train_set.images) job.audit.training_images.push_back(e.image.id);
    for (std::size_t i : score_idx) {
      const auto& e = dataset.images[i];
      job.audit.scored_images.push_back(e.image.id);
      auto it = e.generated.find(generator);
      if (it == e.generated.end()) continue;
      for (const auto& cand : it->second) {
        job.scores.push_back(score_with_all_references(trained.model, &e.image, e.references, cand));
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, jobs.size());
  if (workers == 1) {
    for (auto& j : jobs) run(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
          try {
            run(jobs[k]);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // reassemble in dataset order
  std::vector<std::size_t> position(dataset.size());
  for (int f = 0; f < 2; ++f) {
    std::size_t offset = 0;
    for (std::size_t i : folds[f]) {
      position[i] = offset;
      auto it = dataset.images[i].generated.find(generator);
      if (it != dataset.images[i].generated.end()) offset += it->second.size();
    }
  }
  TwoFoldResult result;
  double total = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto it = dataset.images[i].generated.find(generator);
    if (it == dataset.images[i].generated.end()) continue;
    const int f = fold_of(dataset.images[i].image.id);
    for (std::size_t c = 0; c < it->second.size(); ++c) {
      double sum = 0.0;
      for (const auto& job : jobs) {
        if (job.scored_fold == f) sum += job.scores[position[i] + c];
      }
      const double s = sum / static_cast<double>(replicas);
      result.scores.push_back({i, c, s});
      total += s;
    }
  }
  if (result.scores.empty()) throw DataError("generator '" + generator + "' has no captions to score");
  result.mean_score = total / static_cast<double>(result.scores.size());
  for (auto& job : jobs) result.audit.push_back(std::move(job.audit));
  return result;
}

}  // namespace capcritic
