#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "capcritic/augment.hpp"
#include "capcritic/corpus.hpp"
#include "capcritic/critic.hpp"
#include "capcritic/metrics_baseline.hpp"

namespace capcritic {

struct ScoredPair {
  std::string image_id;
  std::string candidate;
  double score = 0.0;
  Label label = Label::human;
};

// score for human captions, 1 - score for generated ones.
double pair_performance(const ScoredPair& pair);
double dataset_performance(std::span<const ScoredPair> pairs);

// What a metric sees for one candidate: the image and the references it may
// compare against.
struct MetricQuery {
  const ImageRecord* image = nullptr;
  std::vector<const Caption*> references;
  const Caption* candidate = nullptr;
};

class CaptionMetric {
 public:
  virtual ~CaptionMetric() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> score(std::span<const MetricQuery> queries) = 0;
};

// Critic score averaged over the references used as context in turn.
class CriticMetric : public CaptionMetric {
 public:
  explicit CriticMetric(CriticModel& model, std::string name = "critic") : model_(&model), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::vector<double> score(std::span<const MetricQuery> queries) override;

 private:
  CriticModel* model_;
  std::string name_;
};

class BleuMetric : public CaptionMetric {
 public:
  explicit BleuMetric(std::size_t n) : n_(n) {}
  std::string name() const override { return "bleu" + std::to_string(n_); }
  std::vector<double> score(std::span<const MetricQuery> queries) override;

 private:
  std::size_t n_;
};

class RougeMetric : public CaptionMetric {
 public:
  std::string name() const override { return "rougeL"; }
  std::vector<double> score(std::span<const MetricQuery> queries) override;
};

class CiderMetric : public CaptionMetric {
 public:
  explicit CiderMetric(CiderStats stats) : stats_(std::move(stats)) {}
  std::string name() const override { return "cider"; }
  std::vector<double> score(std::span<const MetricQuery> queries) override;

 private:
  CiderStats stats_;
};

// Names: critic (needs a model), bleu1..bleu4, rougeL, cider. ConfigError
// for anything else.
std::unique_ptr<CaptionMetric> make_baseline_metric(const std::string& name, const Dataset& dataset);

// Every reference scored against the other references of its image (images
// with a single reference are skipped).
std::vector<MetricQuery> human_queries(const Dataset& dataset);
double human_mean_score(CaptionMetric& metric, const Dataset& dataset);

struct RobustnessCurve {
  std::string metric;
  TransformKind kind = TransformKind::WP;
  std::vector<double> gammas;
  std::vector<double> means;  // normalized by the metric's human mean
  double auc = 0.0;
};

std::vector<double> default_gamma_grid();

// Trapezoid rule. The grid must be strictly increasing, start at 0 and end
// at 1, with at least two points.
double auc_trapezoid(std::span<const double> gammas, std::span<const double> values);

// Transforms the dataset at every gamma with the same base seed, scores the
// results under the metric and divides by human_mean. WP and RW transform
// each reference and compare it with the remaining ones; RC pairs each image
// with a neighbor's reference and compares with all of its own.
RobustnessCurve robustness_curve(CaptionMetric& metric, const Dataset& dataset, TransformKind kind,
                                 std::span<const double> gammas, std::uint64_t seed, double human_mean);
RobustnessCurve robustness_curve(CaptionMetric& metric, const Dataset& dataset, TransformKind kind,
                                 std::span<const double> gammas, std::uint64_t seed);

// metric, transform, gamma, mean_score; each curve ends with an "auc" row.
void write_robustness_csv(std::span<const RobustnessCurve> curves, const std::string& path);

struct CorrelationReport {
  std::string method;
  double coefficient = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Tau-b in O(n log n). DataError for n < 2 or when either side is constant.
// The p-value uses the tie-corrected normal approximation.
CorrelationReport kendall_tau(std::span<const double> x, std::span<const double> y);
CorrelationReport kendall_tau(std::span<const std::pair<double, double>> pairs);

// DataError for n < 3 or zero variance. Two-sided p-value from Student's t.
CorrelationReport pearson_rho(std::span<const double> x, std::span<const double> y);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

struct WordFrequency {
  int id = 0;
  std::string word;
  double frequency = 0.0;
};

// Relative token frequencies over the valid region of the captions, sorted
// by vocabulary id (the reference-corpus frequency rank). Words that never
// occur are omitted.
std::vector<WordFrequency> word_frequency_profile(std::span<const Caption> captions, const Vocabulary& vocab);
double total_variation(std::span<const WordFrequency> p, std::span<const WordFrequency> q);

// Held-out check of a trained critic: every reference scored against the
// other references of its image, every caption of the named generator against
// all of them. Accuracy thresholds the score at 0.5.
struct SeparationReport {
  double accuracy = 0.0;
  double human_accuracy = 0.0;
  double generated_accuracy = 0.0;
  double human_mean = 0.0;
  double generated_mean = 0.0;
  std::size_t human_pairs = 0;
  std::size_t generated_pairs = 0;
};

SeparationReport separation(CriticModel& model, const Dataset& dataset, const std::string& generator);

}  // namespace capcritic
