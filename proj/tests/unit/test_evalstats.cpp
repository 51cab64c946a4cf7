#include <doctest.h>

#include <cmath>
#include <fstream>

#include "capcritic/csv.hpp"
#include "capcritic/error.hpp"
#include "capcritic/evalstats.hpp"
#include "capcritic/rng.hpp"
#include "helpers.hpp"

using namespace capcritic;

namespace {

double tau_b_bruteforce(const std::vector<double>& x, const std::vector<double>& y) {
  long long c = 0, d = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) ++tx;
      else if (dy == 0) ++ty;
      else if ((dx > 0) == (dy > 0)) ++c;
      else ++d;
    }
  }
  return static_cast<double>(c - d) / std::sqrt(static_cast<double>((c + d + tx) * (c + d + ty)));
}

// Table-driven metric for curve tests.
class FixedMetric : public CaptionMetric {
 public:
  explicit FixedMetric(double v) : v_(v) {}
  std::string name() const override { return "fixed"; }
  std::vector<double> score(std::span<const MetricQuery> q) override { return std::vector<double>(q.size(), v_); }

 private:
  double v_;
};

}  // namespace

TEST_CASE("pair and dataset performance") {
  CHECK(pair_performance({"i", "c", 0.2, Label::generated}) == doctest::Approx(0.8));
  CHECK(pair_performance({"i", "c", 0.9, Label::human}) == 0.9);
  CHECK(pair_performance({"i", "c", 0.5, Label::generated}) == 0.5);
  CHECK(pair_performance({"i", "c", 0.5, Label::human}) == 0.5);
  std::vector<ScoredPair> one = {{"i", "c", 0.2, Label::generated}};
  CHECK(dataset_performance(one) == doctest::Approx(0.8));
  std::vector<ScoredPair> perfect = {{"i", "h", 1.0, Label::human}, {"i", "g", 0.0, Label::generated}};
  CHECK(dataset_performance(perfect) == 1.0);
  std::vector<ScoredPair> inverted = {{"i", "h", 0.0, Label::human}, {"i", "g", 1.0, Label::generated}};
  CHECK(dataset_performance(inverted) == 0.0);
  std::vector<ScoredPair> mid = {{"i", "h", 0.6, Label::human}, {"i", "g", 0.6, Label::generated}};
  CHECK(dataset_performance(mid) == doctest::Approx(0.5).epsilon(1e-15));
  std::vector<ScoredPair> none;
  CHECK_THROWS_AS(dataset_performance(none), DataError);
}

TEST_CASE("trapezoid auc") {
  std::vector<double> g01 = {0.0, 1.0}, ones = {1.0, 1.0};
  CHECK(auc_trapezoid(g01, ones) == 1.0);
  std::vector<double> g3 = {0.0, 0.5, 1.0}, v3 = {1.0, 0.5, 0.0};
  CHECK(auc_trapezoid(g3, v3) == doctest::Approx(0.5).epsilon(1e-15));
  std::vector<double> bad1 = {0.1, 1.0}, bad2 = {0.0, 0.6, 0.5, 1.0}, bad3 = {0.0};
  std::vector<double> v2 = {1.0, 1.0}, v4 = {1, 1, 1, 1}, v1 = {1};
  CHECK_THROWS_AS(auc_trapezoid(bad1, v2), ConfigError);
  CHECK_THROWS_AS(auc_trapezoid(bad2, v4), ConfigError);
  CHECK_THROWS_AS(auc_trapezoid(bad3, v1), ConfigError);
  CHECK_THROWS_AS(auc_trapezoid(g3, v2), ConfigError);
  auto grid = default_gamma_grid();
  CHECK(grid.size() == 11);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 1.0);
}

TEST_CASE("auc is monotone under pointwise domination") {
  auto grid = default_gamma_grid();
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(grid.size()), b(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      a[i] = rng.uniform();
      b[i] = a[i] + rng.uniform() * 0.1;
    }
    CHECK(auc_trapezoid(grid, a) <= auc_trapezoid(grid, b));
  }
}

TEST_CASE("kendall tau examples") {
  std::vector<std::pair<double, double>> same = {{1, 1}, {2, 2}, {3, 3}};
  CHECK(kendall_tau(same).coefficient == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<std::pair<double, double>> rev = {{1, 3}, {2, 2}, {3, 1}};
  CHECK(kendall_tau(rev).coefficient == doctest::Approx(-1.0).epsilon(1e-15));
  std::vector<std::pair<double, double>> third = {{1, 2}, {2, 1}, {3, 3}};
  auto r = kendall_tau(third);
  CHECK(r.coefficient == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.n == 3);
  CHECK(r.method == "kendall");
  std::vector<double> x = {1, 2, 3}, flat = {2, 2, 2}, one = {1};
  CHECK_THROWS_AS(kendall_tau(x, flat), DataError);
  CHECK_THROWS_AS(kendall_tau(one, one), DataError);
}

TEST_CASE("kendall tau matches the pair-count oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 2 + rng.index(19);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.index(5));
      y[i] = static_cast<double>(rng.index(6));
    }
    bool tx = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    bool ty = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (tx || ty) continue;
    double oracle = tau_b_bruteforce(x, y);
    double got = kendall_tau(x, y).coefficient;
    CHECK(got == oracle);
  }
}

TEST_CASE("kendall p-values agree with the asymptotic reference") {
  // reference values computed once with scipy.stats.kendalltau (variant b, asymptotic)
  std::vector<double> x = {1, 2, 2, 3, 4, 4, 4, 5, 6, 7}, y = {2, 1, 3, 3, 5, 4, 6, 6, 7, 7};
  auto r = kendall_tau(x, y);
  CHECK(r.coefficient == doctest::Approx(0.8675328468813838).epsilon(1e-13));
  CHECK(r.p_value == doctest::Approx(0.0009011422639293584).epsilon(1e-9));
  std::vector<double> x2 = {0.1, 0.5, 0.3, 0.9, 0.7, 0.2, 0.8, 0.4}, y2 = {1, 3, 2, 4, 4, 1, 3, 2};
  auto r2 = kendall_tau(x2, y2);
  CHECK(r2.coefficient == doctest::Approx(0.8486684247915055).epsilon(1e-13));
  CHECK(r2.p_value == doctest::Approx(0.004967302907964282).epsilon(1e-9));
}

TEST_CASE("correlations are invariant under increasing maps") {
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(12), y(12), x2(12), y2(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x[i] = rng.normal();
      y[i] = x[i] + rng.normal();
      x2[i] = 3.0 * x[i] + 7.0;
      y2[i] = std::exp(y[i]);
    }
    CHECK(kendall_tau(x2, y2).coefficient == kendall_tau(x, y).coefficient);
    std::vector<double> y3(12);
    for (std::size_t i = 0; i < 12; ++i) y3[i] = 0.5 * y[i] - 2.0;
    CHECK(pearson_rho(x2, y3).coefficient == doctest::Approx(pearson_rho(x, y).coefficient).epsilon(1e-12));
  }
}

TEST_CASE("pearson examples and direct formula") {
  std::vector<double> x = {1, 2, 3}, y = {1, 3, 2};
  CHECK(pearson_rho(x, y).coefficient == doctest::Approx(0.5).epsilon(1e-15));
  std::vector<double> lin = {3, 5, 7};
  auto r = pearson_rho(x, lin);
  CHECK(r.coefficient == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.p_value < 1e-12);

  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    std::size_t n = 3 + rng.index(30);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = rng.normal(), b[i] = a[i] * rng.uniform(-1, 1) + rng.normal();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) ma += a[i], mb += b[i];
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    CHECK(std::abs(pearson_rho(a, b).coefficient - sab / std::sqrt(saa * sbb)) < 1e-12);
  }
  std::vector<double> flat = {1, 1, 1}, two = {1, 2};
  CHECK_THROWS_AS(pearson_rho(x, flat), DataError);
  CHECK_THROWS_AS(pearson_rho(two, two), DataError);
}

TEST_CASE("pearson p-values agree with the t-distribution reference") {
  // reference values computed once with scipy.stats.pearsonr
  std::vector<double> x = {1, 2, 3, 4, 5}, y = {2.1, 3.9, 6.2, 7.8, 10.5};
  auto r = pearson_rho(x, y);
  CHECK(r.coefficient == doctest::Approx(0.9970839152783124).epsilon(1e-13));
  CHECK(r.p_value == doctest::Approx(0.00018894874281345005).epsilon(1e-9));
  std::vector<double> x2 = {3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8}, y2 = {2, 7, 1, 8, 2, 8, 1, 8, 2, 8, 4, 5};
  auto r2 = pearson_rho(x2, y2);
  CHECK(r2.coefficient == doctest::Approx(0.09979900759721552).epsilon(1e-12));
  CHECK(r2.p_value == doctest::Approx(0.7576332870187424).epsilon(1e-9));
}

TEST_CASE("incomplete beta reference values") {
  // scipy.special.betainc
  CHECK(incomplete_beta(2.5, 0.5, 0.3) == doctest::Approx(0.018927124071945658).epsilon(1e-12));
  CHECK(incomplete_beta(5, 3, 0.7) == doctest::Approx(0.6470695).epsilon(1e-12));
  CHECK(incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
}

TEST_CASE("word frequency profile") {
  auto v = testing::small_vocab({"a", "b", "c"});
  std::vector<Caption> caps = {encode_text("a a b", *v)};
  auto p = word_frequency_profile(caps, *v);
  REQUIRE(p.size() == 2);
  CHECK(p[0].word == "a");
  CHECK(p[0].frequency == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(p[1].frequency == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  auto ds = testing::tiny_synth(40, 7);
  std::vector<Caption> refs, gens;
  for (const auto& e : ds.images) {
    refs.insert(refs.end(), e.references.begin(), e.references.end());
    gens.insert(gens.end(), e.generated.at("synth").begin(), e.generated.at("synth").end());
  }
  auto pr = word_frequency_profile(refs, *ds.vocab), pg = word_frequency_profile(gens, *ds.vocab);
  double s = 0.0;
  for (const auto& w : pr) s += w.frequency;
  CHECK(std::abs(s - 1.0) < 1e-12);
  for (std::size_t i = 1; i < pr.size(); ++i) CHECK(pr[i - 1].id < pr[i].id);
  CHECK(total_variation(pr, pg) > 0.05);
  CHECK(total_variation(pr, pr) == 0.0);
}

TEST_CASE("robustness curves") {
  auto ds = testing::tiny_synth(12, 3);
  auto grid = default_gamma_grid();
  FixedMetric half(0.5);
  for (auto k : {TransformKind::RC, TransformKind::WP, TransformKind::RW}) {
    auto c = robustness_curve(half, ds, k, grid, 4);
    CHECK(c.auc == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.gammas == grid);
  }

  // paired design: the same seed gives the same curve
  BleuMetric b4(4);
  auto a = robustness_curve(b4, ds, TransformKind::WP, grid, 9);
  auto b = robustness_curve(b4, ds, TransformKind::WP, grid, 9);
  CHECK(a.means == b.means);
  // gamma 0 already moves two words, so the curve starts below 1
  CHECK(a.means.front() < 1.0);
  CHECK(a.metric == "bleu4");

  // rouge on RW: full replacement leaves nothing in common
  RougeMetric rl;
  auto rw = robustness_curve(rl, ds, TransformKind::RW, grid, 2);
  CHECK(rw.means.back() < rw.means.front());

  testing::TempDir dir("rob");
  std::vector<RobustnessCurve> curves = {a, rw};
  write_robustness_csv(curves, dir.file("r.csv"));
  auto t = csv::read_file(dir.file("r.csv"));
  CHECK(t.header == std::vector<std::string>{"metric", "transform", "gamma", "mean_score"});
  CHECK(t.rows.size() == 2 * (grid.size() + 1));
  CHECK(t.rows[grid.size()][2] == "auc");
}

TEST_CASE("baseline metric factory and human queries") {
  auto ds = testing::tiny_synth(6, 3);
  for (std::string n : {"bleu1", "bleu4", "rougeL", "cider"}) CHECK(make_baseline_metric(n, ds)->name() == n);
  CHECK_THROWS_AS(make_baseline_metric("critic", ds), ConfigError);
  CHECK_THROWS_AS(make_baseline_metric("meteor", ds), ConfigError);
  auto q = human_queries(ds);
  CHECK(q.size() == ds.reference_count());
  for (const auto& m : q) {
    CHECK(m.references.size() == 4);
    for (const auto* r : m.references) CHECK(r != m.candidate);
  }
}
