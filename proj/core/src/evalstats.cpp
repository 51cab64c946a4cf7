#include "capcritic/evalstats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>

#include "capcritic/csv.hpp"
#include "capcritic/error.hpp"

namespace capcritic {

double pair_performance(const ScoredPair& pair) {
  return pair.label == Label::generated ? 1.0 - pair.score : pair.score;
}

double dataset_performance(std::span<const ScoredPair> pairs) {
  if (pairs.empty()) throw DataError("dataset_performance: no scored pairs");
  double total = 0.0;
  for (const auto& p : pairs) total += pair_performance(p);
  return total / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------

std::vector<double> CriticMetric::score(std::span<const MetricQuery> queries) {
  const bool per_reference = uses_caption(model_->config.context);
  std::vector<ExampleView> views;
  std::vector<std::size_t> counts;
  for (const auto& q : queries) {
    if (per_reference) {
      if (q.references.empty()) throw ConfigError("critic with caption context needs a reference");
      for (const Caption* r : q.references) views.push_back({q.image, r, q.candidate});
      counts.push_back(q.references.size());
    } else {
      views.push_back({q.image, nullptr, q.candidate});
      counts.push_back(1);
    }
  }
  std::vector<double> out;
  if (views.empty()) return out;
  const auto raw = score_batch(*model_, views);
  std::size_t k = 0;
  for (std::size_t c : counts) {
    double s = 0.0;
    for (std::size_t i = 0; i < c; ++i) s += raw[k++];
    out.push_back(s / static_cast<double>(c));
  }
  return out;
}

std::vector<double> BleuMetric::score(std::span<const MetricQuery> queries) {
  std::vector<double> out;
  for (const auto& q : queries) out.push_back(bleu(*q.candidate, q.references, n_));
  return out;
}

std::vector<double> RougeMetric::score(std::span<const MetricQuery> queries) {
  std::vector<double> out;
  for (const auto& q : queries) out.push_back(rouge_l(*q.candidate, q.references));
  return out;
}

std::vector<double> CiderMetric::score(std::span<const MetricQuery> queries) {
  std::vector<double> out;
  for (const auto& q : queries) out.push_back(cider(*q.candidate, q.references, stats_));
  return out;
}

std::unique_ptr<CaptionMetric> make_baseline_metric(const std::string& name, const Dataset& dataset) {
  if (name.size() == 5 && name.rfind("bleu", 0) == 0 && name[4] >= '1' && name[4] <= '4') {
    return std::make_unique<BleuMetric>(static_cast<std::size_t>(name[4] - '0'));
  }
  if (name == "rougeL") return std::make_unique<RougeMetric>();
  if (name == "cider") return std::make_unique<CiderMetric>(CiderStats::build(dataset));
  if (name == "critic") throw ConfigError("the critic metric needs a trained model");
  throw ConfigError("unknown metric '" + name + "' (expected bleu1..bleu4, rougeL, cider or critic)");
}

std::vector<MetricQuery> human_queries(const Dataset& dataset) {
  std::vector<MetricQuery> out;
  for (const auto& e : dataset.images) {
    if (e.references.size() < 2) continue;
    for (std::size_t j = 0; j < e.references.size(); ++j) {
      MetricQuery q{&e.image, {}, &e.references[j]};
      for (std::size_t k = 0; k < e.references.size(); ++k) {
        if (k != j) q.references.push_back(&e.references[k]);
      }
      out.push_back(std::move(q));
    }
  }
  return out;
}

namespace {

double mean_of(std::span<const double> v) {
  if (v.empty()) throw DataError("no pairs to average");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double human_mean_score(CaptionMetric& metric, const Dataset& dataset) {
  const auto queries = human_queries(dataset);
  if (queries.empty()) throw DataError("human baseline needs images with at least two references");
  return mean_of(metric.score(queries));
}

std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

double auc_trapezoid(std::span<const double> gammas, std::span<const double> values) {
  if (gammas.size() < 2) throw ConfigError("gamma grid needs at least two points");
  if (gammas.size() != values.size()) throw ConfigError("gamma grid and values differ in length");
  if (gammas.front() != 0.0 || gammas.back() != 1.0) throw ConfigError("gamma grid must span [0, 1]");
  double area = 0.0;
  for (std::size_t i = 1; i < gammas.size(); ++i) {
    if (!(gammas[i] > gammas[i - 1])) throw ConfigError("gamma grid must be strictly increasing");
    area += 0.5 * (values[i] + values[i - 1]) * (gammas[i] - gammas[i - 1]);
  }
  return area;
}

RobustnessCurve robustness_curve(CaptionMetric& metric, const Dataset& dataset, TransformKind kind,
                                 std::span<const double> gammas, std::uint64_t seed, double human_mean) {
  {
    std::vector<double> zeros(gammas.size(), 0.0);
    auc_trapezoid(gammas, zeros);  // grid validation
  }
  if (!(human_mean > 0.0)) throw DataError("metric gives human captions a non-positive mean score");
  if (!dataset.vocab) throw ConfigError("dataset has no vocabulary");
  RobustnessCurve curve;
  curve.metric = metric.name();
  curve.kind = kind;
  curve.gammas.assign(gammas.begin(), gammas.end());

  std::optional<NeighborIndex> neighbors;
  if (kind == TransformKind::RC) {
    if (dataset.size() < 2) throw DataError("transform RC needs at least two images");
    neighbors.emplace(dataset);
  }
  for (double gamma : gammas) {
    std::vector<Caption> made;
    std::vector<MetricQuery> queries;
    if (kind == TransformKind::RC) {
      const auto pairs = transform_rc(dataset, *neighbors, gamma, seed);
      made.reserve(pairs.size());
      for (const auto& p : pairs) {
        made.push_back(p.caption);
        const auto& e = dataset.images[p.image];
        MetricQuery q{&e.image, {}, nullptr};
        for (const auto& r : e.references) q.references.push_back(&r);
        queries.push_back(std::move(q));
      }
    } else {
      made.reserve(dataset.reference_count());
      for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& e = dataset.images[i];
        if (e.references.size() < 2) continue;
        for (std::size_t j = 0; j < e.references.size(); ++j) {
          const std::uint64_t s = derive_seed(derive_seed(seed, i), j);
          try {
            made.push_back(kind == TransformKind::WP ? transform_wp(e.references[j], gamma, *dataset.vocab, s)
                                                     : transform_rw(e.references[j], gamma, *dataset.vocab, s));
          } catch (const DataError&) {
            continue;  // caption too short or uniform to transform
          }
          MetricQuery q{&e.image, {}, nullptr};
          for (std::size_t k = 0; k < e.references.size(); ++k) {
            if (k != j) q.references.push_back(&e.references[k]);
          }
          queries.push_back(std::move(q));
        }
      }
    }
    for (std::size_t k = 0; k < queries.size(); ++k) queries[k].candidate = &made[k];
    const auto scores = metric.score(queries);
    curve.means.push_back(mean_of(scores) / human_mean);
  }
  curve.auc = auc_trapezoid(curve.gammas, curve.means);
  return curve;
}

RobustnessCurve robustness_curve(CaptionMetric& metric, const Dataset& dataset, TransformKind kind,
                                 std::span<const double> gammas, std::uint64_t seed) {
  return robustness_curve(metric, dataset, kind, gammas, seed, human_mean_score(metric, dataset));
}

void write_robustness_csv(std::span<const RobustnessCurve> curves, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write robustness file: " + path);
  csv::write_row(out, {"metric", "transform", "gamma", "mean_score"});
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.gammas.size(); ++i) {
      csv::write_row(out, {c.metric, to_string(c.kind), csv::format_double(c.gammas[i]),
                           csv::format_double(c.means[i])});
    }
    csv::write_row(out, {c.metric, to_string(c.kind), "auc", csv::format_double(c.auc)});
  }
  if (!out) throw DataError("failed writing robustness file: " + path);
}

// ---------------------------------------------------------------------------

namespace {

std::int64_t tie_pairs(std::span<const double> sorted) {
  std::int64_t total = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<std::int64_t>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

struct TieSums {
  double t2 = 0.0;  // sum t(t-1)/2
  double t3 = 0.0;  // sum t(t-1)(t-2)
  double t5 = 0.0;  // sum t(t-1)(2t+5)
};

TieSums tie_sums(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  TieSums s;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double t = static_cast<double>(j - i);
    s.t2 += t * (t - 1.0) / 2.0;
    s.t3 += t * (t - 1.0) * (t - 2.0);
    s.t5 += t * (t - 1.0) * (2.0 * t + 5.0);
    i = j;
  }
  return s;
}

// Sorts v in place and returns the number of strict inversions.
std::int64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

CorrelationReport kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("kendall_tau: inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw DataError("kendall_tau needs at least two pairs");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = x[order[i]];
    ys[i] = y[order[i]];
  }
  const std::int64_t n1 = tie_pairs(xs);
  std::int64_t n3 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
    const auto t = static_cast<std::int64_t>(j - i);
    n3 += t * (t - 1) / 2;
    i = j;
  }
  std::vector<double> buf(n);
  const std::int64_t swaps = merge_count(ys, buf, 0, n);
  const std::int64_t n2 = tie_pairs(ys);
  const auto nn = static_cast<std::int64_t>(n);
  const std::int64_t n0 = nn * (nn - 1) / 2;
  const std::int64_t con_minus_dis = n0 - n1 - n2 + n3 - 2 * swaps;
  if (n0 == n1 || n0 == n2) throw DataError("kendall_tau is undefined when one side is constant");

  CorrelationReport r;
  r.method = "kendall";
  r.n = n;
  r.coefficient = static_cast<double>(con_minus_dis) /
                  std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  r.coefficient = std::clamp(r.coefficient, -1.0, 1.0);

  const TieSums tx = tie_sums(std::vector<double>(x.begin(), x.end()));
  const TieSums ty = tie_sums(std::vector<double>(y.begin(), y.end()));
  const double size = static_cast<double>(n);
  const double m = size * (size - 1.0);
  double var = (m * (2.0 * size + 5.0) - tx.t5 - ty.t5) / 18.0 + 2.0 * tx.t2 * ty.t2 / m;
  if (n > 2) var += tx.t3 * ty.t3 / (9.0 * m * (size - 2.0));
  if (var > 0.0) {
    const double z = static_cast<double>(con_minus_dis) / std::sqrt(var);
    r.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
  }
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

CorrelationReport kendall_tau(std::span<const std::pair<double, double>> pairs) {
  std::vector<double> x, y;
  for (const auto& [a, b] : pairs) {
    x.push_back(a);
    y.push_back(b);
  }
  return kendall_tau(x, y);
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete_beta: parameters must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

CorrelationReport pearson_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ConfigError("pearson_rho: inputs differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw DataError("pearson_rho needs at least three pairs");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson_rho is undefined for a constant input");
  CorrelationReport r;
  r.method = "pearson";
  r.n = n;
  r.coefficient = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n) - 2.0;
  const double one_minus = 1.0 - r.coefficient * r.coefficient;
  // t tail: P(|T| > t) = I_{df / (df + t^2)}(df / 2, 1 / 2), and df / (df + t^2) = 1 - rho^2
  r.p_value = one_minus <= 0.0 ? 0.0 : std::clamp(incomplete_beta(df / 2.0, 0.5, one_minus), 0.0, 1.0);
  return r;
}

std::vector<WordFrequency> word_frequency_profile(std::span<const Caption> captions, const Vocabulary& vocab) {
  std::vector<double> counts(vocab.size(), 0.0);
  double total = 0.0;
  for (const auto& c : captions) {
    for (int id : c.tokens()) {
      counts.at(static_cast<std::size_t>(id)) += 1.0;
      total += 1.0;
    }
  }
  std::vector<WordFrequency> out;
  if (total == 0.0) return out;
  for (std::size_t id = 0; id < counts.size(); ++id) {
    if (counts[id] > 0.0) out.push_back({static_cast<int>(id), vocab.word(static_cast<int>(id)), counts[id] / total});
  }
  return out;
}

double total_variation(std::span<const WordFrequency> p, std::span<const WordFrequency> q) {
  std::map<int, double> diff;
  for (const auto& w : p) diff[w.id] += w.frequency;
  for (const auto& w : q) diff[w.id] -= w.frequency;
  double s = 0.0;
  for (const auto& [id, d] : diff) s += std::abs(d);
  return 0.5 * s;
}

SeparationReport separation(CriticModel& model, const Dataset& dataset, const std::string& generator) {
  const std::vector<MetricQuery> human = human_queries(dataset);
  std::vector<MetricQuery> generated;
  for (const auto& e : dataset.images) {
    auto it = e.generated.find(generator);
    if (it == e.generated.end() || e.references.empty()) continue;
    for (const auto& c : it->second) {
      MetricQuery q{&e.image, {}, &c};
      for (const auto& r : e.references) q.references.push_back(&r);
      generated.push_back(std::move(q));
    }
  }
  if (human.empty() || generated.empty()) throw DataError("separation needs human pairs and generator captions");
  CriticMetric metric(model);
  const auto hs = metric.score(human);
  const auto gs = metric.score(generated);
  SeparationReport r;
  r.human_pairs = hs.size();
  r.generated_pairs = gs.size();
  std::size_t human_ok = 0, generated_ok = 0;
  for (double s : hs) human_ok += s > 0.5 ? 1 : 0;
  for (double s : gs) generated_ok += s < 0.5 ? 1 : 0;
  r.accuracy = static_cast<double>(human_ok + generated_ok) / static_cast<double>(hs.size() + gs.size());
  r.human_accuracy = static_cast<double>(human_ok) / static_cast<double>(hs.size());
  r.generated_accuracy = static_cast<double>(generated_ok) / static_cast<double>(gs.size());
  r.human_mean = mean_of(hs);
  r.generated_mean = mean_of(gs);
  return r;
}

}  // namespace capcritic
