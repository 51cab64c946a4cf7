#include <doctest.h>

#include <cmath>

#include "capcritic/error.hpp"
#include "capcritic/fft.hpp"
#include "capcritic/fusion.hpp"
#include "capcritic/rng.hpp"

using namespace capcritic;

TEST_CASE("count sketch hand example") {
  CountSketchPlan plan;
  plan.input_dim = 2;
  plan.output_dim = 2;
  plan.hash = {0, 1};
  plan.sign = {1.0, -1.0};
  std::vector<double> x = {3, 5};
  CHECK(count_sketch(x, plan) == std::vector<double>{3.0, -5.0});
  std::vector<double> zero = {0, 0};
  CHECK(count_sketch(zero, plan) == std::vector<double>{0.0, 0.0});
  std::vector<double> wrong = {1, 2, 3};
  CHECK_THROWS(count_sketch(wrong, plan));
}

TEST_CASE("count sketch plans") {
  auto a = CountSketchPlan::make(1, 50, 16);
  auto b = CountSketchPlan::make(1, 50, 16);
  auto c = CountSketchPlan::make(2, 50, 16);
  CHECK(a.hash == b.hash);
  CHECK(a.sign == b.sign);
  CHECK(a.hash != c.hash);
  for (auto h : a.hash) CHECK(h < 16u);
  for (double s : a.sign) CHECK((s == 1.0 || s == -1.0));
}

TEST_CASE("count sketch is additive") {
  Rng rng(5);
  auto plan = CountSketchPlan::make(3, 20, 8);
  std::vector<double> x(20), y(20), xy(20);
  for (std::size_t i = 0; i < 20; ++i) {
    // dyadic values keep every sum exact
    x[i] = static_cast<double>(rng.index(64)) / 8.0;
    y[i] = static_cast<double>(rng.index(64)) / 4.0;
    xy[i] = x[i] + y[i];
  }
  auto sx = count_sketch(x, plan), sy = count_sketch(y, plan), sxy = count_sketch(xy, plan);
  for (std::size_t k = 0; k < 8; ++k) CHECK(sxy[k] == sx[k] + sy[k]);
}

TEST_CASE("sketch convolution equals sketch of the outer product") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto p1 = CountSketchPlan::make(100 + trial, 4, 8);
    auto p2 = CountSketchPlan::make(200 + trial, 4, 8);
    std::vector<double> x(4), y(4);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    auto conv = circular_convolve(count_sketch(x, p1), count_sketch(y, p2));
    // joint plan on the flattened outer product: h = (h1 + h2) mod D, s = s1 s2
    std::vector<double> direct(8, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) direct[(p1.hash[i] + p2.hash[j]) % 8] += p1.sign[i] * p2.sign[j] * x[i] * y[j];
    for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(conv[k] - direct[k]) < 1e-10);
  }
}

TEST_CASE("fusion output dims and zero cases") {
  FusionConfig cfg;
  cfg.strategy = FusionStrategy::concat_mlp;
  cfg.mlp_hidden = 7;
  auto mlp = make_fusion(cfg, 4, 3, 1);
  CHECK(mlp.output_dim() == 7);
  std::fill(mlp.mlp_weight->value.data.begin(), mlp.mlp_weight->value.data.end(), 0.0);
  std::fill(mlp.mlp_bias->value.data.begin(), mlp.mlp_bias->value.data.end(), 0.0);
  std::vector<double> ctx = {1, 2, 3, 4}, cand = {-1, 0.5, 2};
  for (double v : fuse(mlp, ctx, cand)) CHECK(v == 0.0);

  cfg.strategy = FusionStrategy::concat_linear;
  auto lin = make_fusion(cfg, 4, 3, 1);
  CHECK(lin.output_dim() == 7);
  CHECK(fuse(lin, ctx, cand) == std::vector<double>{1, 2, 3, 4, -1, 0.5, 2});

  cfg.strategy = FusionStrategy::cbp_linear;
  cfg.cbp_dim = 16;
  auto cbp = make_fusion(cfg, 4, 3, 1);
  CHECK(cbp.output_dim() == 16);
  std::vector<double> zero = {0, 0, 0};
  for (double v : fuse(cbp, ctx, zero)) CHECK(v == 0.0);
  REQUIRE(cbp.context_plan.has_value());
  CHECK(cbp.context_plan->seed != cbp.candidate_plan->seed);

  CHECK_THROWS_AS(make_fusion(cfg, 0, 3, 1), ConfigError);
  cfg.cbp_dim = 12;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("cbp pooling is bilinear before normalization") {
  FusionConfig cfg;
  cfg.strategy = FusionStrategy::cbp_linear;
  cfg.cbp_dim = 32;
  cfg.cbp_normalize = false;
  auto p = make_fusion(cfg, 5, 4, 3);
  Rng rng(8);
  std::vector<double> a(5), b(4), a2(5);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  for (std::size_t i = 0; i < 5; ++i) a2[i] = -2.5 * a[i];
  auto v1 = fuse(p, a, b), v2 = fuse(p, a2, b);
  for (std::size_t k = 0; k < 32; ++k) CHECK(v2[k] == doctest::Approx(-2.5 * v1[k]).epsilon(1e-10));

  cfg.cbp_normalize = true;
  auto q = make_fusion(cfg, 5, 4, 3);
  auto n = fuse(q, a, b);
  double norm = 0.0;
  for (double x : n) norm += x * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fusion strategy names") {
  for (auto s : {FusionStrategy::concat_linear, FusionStrategy::concat_mlp, FusionStrategy::cbp_linear}) {
    CHECK(parse_fusion_strategy(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_fusion_strategy("outer"), ConfigError);
}
