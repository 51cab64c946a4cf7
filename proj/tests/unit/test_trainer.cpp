#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "capcritic/csv.hpp"
#include "capcritic/error.hpp"
#include "capcritic/trainer.hpp"
#include "helpers.hpp"

using namespace capcritic;

namespace {

TrainConfig tiny_train(const Dataset& ds, std::size_t epochs = 2) {
  TrainConfig tc;
  tc.batch_size = 20;
  tc.epochs = epochs;
  tc.seed = 3;
  tc.generator = "synth";
  tc.model = testing::tiny_model(*ds.vocab, ds.feature_dim());
  return tc;
}

}  // namespace

TEST_CASE("adam first step moves by about lr") {
  std::vector<double> x = {0.0}, m = {0.0}, v = {0.0};
  std::vector<double> g = {1.0};
  adam_update(x, g, m, v, 1, 1e-3, AdamConfig{});
  CHECK(x[0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adam with zero gradient leaves parameters alone") {
  Parameter p("p", Tensor(2, 2, {1, 2, 3, 4}));
  p.zero_grad();
  std::vector<Parameter*> ps = {&p};
  auto state = AdamState::for_parameters(ps);
  for (int i = 0; i < 50; ++i) adam_step(ps, state, 1e-2, AdamConfig{});
  CHECK(p.value.data == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("adam is invariant to how parameters are partitioned") {
  Rng rng(7);
  Parameter a("a", Tensor(2, 3)), b("b", Tensor(1, 4));
  for (auto* p : {&a, &b})
    for (auto& x : p->value.data) x = rng.normal();
  std::vector<double> flat;
  for (auto* p : {&a, &b}) flat.insert(flat.end(), p->value.data.begin(), p->value.data.end());
  std::vector<double> fm(flat.size()), fv(flat.size());
  std::vector<Parameter*> ps = {&a, &b};
  auto state = AdamState::for_parameters(ps);

  for (std::size_t step = 1; step <= 5; ++step) {
    // gradient of sum(x^3)
    std::vector<double> fg;
    for (auto* p : ps) {
      p->grad = Tensor(p->value.rows, p->value.cols);
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        p->grad.data[i] = 3.0 * p->value.data[i] * p->value.data[i];
      }
    }
    for (double x : flat) fg.push_back(3.0 * x * x);
    adam_step(ps, state, 1e-2, AdamConfig{});
    adam_update(flat, fg, fm, fv, step, 1e-2, AdamConfig{});
  }
  std::size_t k = 0;
  for (auto* p : ps)
    for (double x : p->value.data) CHECK(x == flat[k++]);
}

TEST_CASE("balanced batches with distinct context") {
  auto ds = testing::tiny_synth(10, 2);
  auto batch = make_batch(ds, NegativeMixer::all_sources(), "synth", 100, 9);
  REQUIRE(batch.size() == 100);
  int human = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    if (ex.label == Label::human) {
      ++human;
      CHECK(i < 50);
      REQUIRE(ex.reference.has_value());
      CHECK_FALSE(*ex.reference == ex.candidate);
    }
  }
  CHECK(human == 50);
  auto again = make_batch(ds, NegativeMixer::all_sources(), "synth", 100, 9);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(again[i].candidate == batch[i].candidate);
    CHECK(again[i].image == batch[i].image);
    CHECK(again[i].label == batch[i].label);
  }
}

TEST_CASE("config validation") {
  TrainConfig tc;
  tc.batch_size = 7;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  tc.batch_size = 10;
  tc.learning_rate = 0.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
  CHECK(generator_eval_preset().epochs == 10);
  CHECK(TrainConfig{}.epochs == 30);
}

TEST_CASE("epoch length and lr schedule") {
  auto ds = testing::tiny_synth(6, 1);  // 30 references
  CHECK(batches_per_epoch(ds, 20) == 3);
  CHECK(batches_per_epoch(ds, 100) == 1);
  auto tc = tiny_train(ds, 4);
  auto r = train(ds, tc);
  REQUIRE(r.history.size() == 4);
  for (const auto& h : r.history) {
    CHECK(std::isfinite(h.mean_loss));
    CHECK(h.lr == doctest::Approx(1e-3 * std::pow(0.9, static_cast<double>(h.epoch - 1))).epsilon(1e-15));
  }
}

TEST_CASE("training smoke and determinism") {
  auto ds = testing::tiny_synth(2, 1);  // 10 references
  auto tc = tiny_train(ds, 1);
  auto a = train(ds, tc);
  CHECK(std::isfinite(a.history[0].mean_loss));
  auto b = train(ds, tc);
  auto pa = a.model.parameters(), pb = b.model.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("loss falls on separable synthetic data") {
  auto ds = testing::tiny_synth(30, 4);
  auto tc = tiny_train(ds, 30);
  tc.model.hidden = 8;
  tc.model.embed_dim = 8;
  tc.mixer = NegativeMixer::generator_only();
  tc.learning_rate = 1e-2;
  auto r = train(ds, tc);
  CHECK(r.history.back().mean_loss < r.history.front().mean_loss);
}

TEST_CASE("validation history and csv") {
  testing::TempDir dir("history");
  auto ds = testing::tiny_synth(8, 2);
  auto val = testing::tiny_synth(4, 3);
  auto tc = tiny_train(ds, 2);
  val.vocab = ds.vocab;
  auto r = train(ds, tc, &val);
  for (const auto& h : r.history) {
    REQUIRE(h.val_human_mean.has_value());
    REQUIRE(h.val_generated_mean.has_value());
  }
  write_history(r.history, dir.file("h.csv"));
  auto t = csv::read_file(dir.file("h.csv"));
  CHECK(t.header == std::vector<std::string>{"epoch", "mean_loss", "lr", "val_human_mean", "val_generated_mean"});
  CHECK(t.rows.size() == 2);
}

TEST_CASE("two-fold scoring partitions images and isolates folds") {
  auto ds = testing::tiny_synth(12, 5);
  auto tc = tiny_train(ds, 1);
  auto r = two_fold_score(ds, "synth", tc, 3, 2);

  std::size_t expected = 0;
  for (const auto& e : ds.images) expected += e.generated.at("synth").size();
  CHECK(r.scores.size() == expected);
  double sum = 0.0;
  for (const auto& s : r.scores) {
    CHECK(s.score >= 0.0);
    CHECK(s.score <= 1.0);
    sum += s.score;
  }
  CHECK(r.mean_score == doctest::Approx(sum / static_cast<double>(expected)).epsilon(1e-14));

  REQUIRE(r.audit.size() == 6);
  std::map<std::size_t, std::multiset<std::string>> scored_per_replica;
  for (const auto& a : r.audit) {
    std::set<std::string> train_ids(a.training_images.begin(), a.training_images.end());
    for (const auto& id : a.scored_images) {
      CHECK(train_ids.count(id) == 0);
      CHECK(fold_of(id) == a.scored_fold);
      scored_per_replica[a.replica].insert(id);
    }
  }
  // every image scored exactly once per replica
  for (const auto& [rep, ids] : scored_per_replica) {
    CHECK(ids.size() == ds.size());
    for (const auto& e : ds.images) CHECK(ids.count(e.image.id) == 1);
  }

  // replicas average; threads do not change the result
  auto serial = two_fold_score(ds, "synth", tc, 3, 1);
  for (std::size_t i = 0; i < r.scores.size(); ++i) CHECK(serial.scores[i].score == r.scores[i].score);

  CHECK_THROWS_AS(two_fold_score(ds, "missing", tc), DataError);
  CHECK_THROWS_AS(two_fold_score(ds, "synth", tc, 0), ConfigError);
}

TEST_CASE("fold assignment is a stable hash parity") {
  CHECK(fold_of("img_0") == static_cast<int>(stable_hash("img_0") & 1U));
  CHECK(fold_of("img_0") == fold_of("img_0"));
}
