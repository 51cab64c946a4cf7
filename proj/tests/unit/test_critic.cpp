#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "capcritic/critic.hpp"
#include "capcritic/error.hpp"
#include "helpers.hpp"

using namespace capcritic;

namespace {

struct Fixture {
  Dataset ds = testing::tiny_synth(6, 4);
  ModelConfig cfg = testing::tiny_model(*ds.vocab, ds.feature_dim());

  std::vector<LabeledExample> batch() const {
    std::vector<LabeledExample> b(2);
    b[0].image = &ds.images[0].image;
    b[0].reference = ds.images[0].references[0];
    b[0].candidate = ds.images[0].references[1];
    b[0].label = Label::human;
    b[1].image = &ds.images[1].image;
    b[1].reference = ds.images[1].references[0];
    b[1].candidate = ds.images[1].generated.at("synth")[0];
    b[1].label = Label::generated;
    return b;
  }
};

void zero_classifier(CriticModel& m) {
  std::fill(m.classifier_weight.value.data.begin(), m.classifier_weight.value.data.end(), 0.0);
  std::fill(m.classifier_bias.value.data.begin(), m.classifier_bias.value.data.end(), 0.0);
}

}  // namespace

TEST_CASE("scores are probabilities") {
  Fixture f;
  for (auto fs : {FusionStrategy::concat_linear, FusionStrategy::concat_mlp, FusionStrategy::cbp_linear}) {
    f.cfg.fusion.strategy = fs;
    auto m = make_model(f.cfg, *f.ds.vocab);
    for (const auto& e : f.ds.images) {
      for (const auto& c : e.references) {
        double s = score(m, &e.image, &e.references[0], c);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
      }
    }
    Tape tape;
    auto b = f.batch();
    std::vector<ExampleView> views = {b[0].view(), b[1].view()};
    auto p = softmax_rows(tape.value(forward_logits(tape, m, views)));
    for (std::size_t r = 0; r < 2; ++r) CHECK(p.at(r, 0) + p.at(r, 1) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("zero classifier gives one half and ln 2") {
  Fixture f;
  auto m = make_model(f.cfg, *f.ds.vocab);
  zero_classifier(m);
  CHECK(score(m, &f.ds.images[0].image, &f.ds.images[0].references[0], f.ds.images[0].references[2]) == 0.5);
  CHECK(loss(m, f.batch()) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("perfectly separated batch has vanishing loss") {
  Fixture f;
  f.cfg.fusion.strategy = FusionStrategy::concat_linear;
  auto m = make_model(f.cfg, *f.ds.vocab);
  zero_classifier(m);
  auto b = f.batch();
  b[1].label = Label::human;
  m.classifier_bias.value.data = {200.0, -200.0};
  CHECK(loss(m, b) < 1e-12);
}

TEST_CASE("score_with_all_references averages per-reference scores") {
  Fixture f;
  auto m = make_model(f.cfg, *f.ds.vocab);
  const auto& e = f.ds.images[2];
  const Caption& cand = e.generated.at("synth")[0];
  std::span<const Caption> one(e.references.data(), 1);
  CHECK(score_with_all_references(m, &e.image, one, cand) == score(m, &e.image, &e.references[0], cand));
  std::vector<Caption> same(3, e.references[1]);
  CHECK(score_with_all_references(m, &e.image, same, cand) ==
        doctest::Approx(score(m, &e.image, &e.references[1], cand)).epsilon(1e-15));
  std::span<const Caption> two(e.references.data(), 2);
  double s0 = score(m, &e.image, &e.references[0], cand), s1 = score(m, &e.image, &e.references[1], cand);
  CHECK(score_with_all_references(m, &e.image, two, cand) == doctest::Approx((s0 + s1) / 2.0).epsilon(1e-15));
}

TEST_CASE("context mismatch raises") {
  Fixture f;
  auto m = make_model(f.cfg, *f.ds.vocab);
  const auto& e = f.ds.images[0];
  CHECK_THROWS_AS(score(m, &e.image, nullptr, e.references[0]), ConfigError);
  CHECK_THROWS_AS(score(m, nullptr, &e.references[1], e.references[0]), ConfigError);
}

TEST_CASE("context none ignores the image") {
  Fixture f;
  f.cfg.context = ContextMode::none;
  auto m = make_model(f.cfg, *f.ds.vocab);
  const auto& c = f.ds.images[0].references[0];
  double a = score(m, nullptr, nullptr, c);
  for (const auto& e : f.ds.images) CHECK(score(m, &e.image, nullptr, c) == a);
}

TEST_CASE("label swap changes one term of the loss") {
  Fixture f;
  auto m = make_model(f.cfg, *f.ds.vocab);
  auto b = f.batch();
  double before = loss(m, b);
  double p = score(m, b[1].image, &*b[1].reference, b[1].candidate);
  b[1].label = Label::human;
  double after = loss(m, b);
  // mean over 2 rows: the swapped row moves from -log(1-p) to -log(p)
  CHECK(after - before == doctest::Approx((-std::log(p) + std::log(1.0 - p)) / 2.0).epsilon(1e-12));
}

TEST_CASE("full critic gradients on a two-example batch") {
  for (auto ctx : {ContextMode::none, ContextMode::image, ContextMode::caption, ContextMode::image_caption}) {
    for (auto fs : {FusionStrategy::concat_linear, FusionStrategy::concat_mlp, FusionStrategy::cbp_linear}) {
      if (ctx == ContextMode::none && fs == FusionStrategy::cbp_linear) continue;
      Fixture f;
      f.cfg.context = ctx;
      f.cfg.fusion.strategy = fs;
      auto m = make_model(f.cfg, *f.ds.vocab);
      auto b = f.batch();
      if (!uses_caption(ctx)) b[0].reference.reset(), b[1].reference.reset();
      if (!uses_image(ctx)) b[0].image = b[1].image = nullptr;
      auto params = m.parameters();
      auto r = check_gradients(params, [&](Tape& t) { return build_loss(t, m, b); }, 1e-5, 1e-3);
      INFO(to_string(ctx) << " / " << to_string(fs) << " worst " << r.worst_parameter << " " << r.max_rel_error);
      CHECK(r.max_rel_error < 1e-3);
    }
  }
}

TEST_CASE("cbp with empty context is rejected") {
  Fixture f;
  f.cfg.context = ContextMode::none;
  f.cfg.fusion.strategy = FusionStrategy::cbp_linear;
  CHECK_THROWS_AS(make_model(f.cfg, *f.ds.vocab), ConfigError);
}

TEST_CASE("model file round trip and validation") {
  testing::TempDir dir("model");
  Fixture f;
  f.cfg.fusion.strategy = FusionStrategy::cbp_linear;
  auto m = make_model(f.cfg, *f.ds.vocab);
  save_model(m, dir.file("m.crt"));
  auto back = load_model(dir.file("m.crt"), f.ds.vocab.get());
  CHECK(back.config == m.config);
  for (const auto& e : f.ds.images) {
    const Caption& c = e.generated.at("synth")[0];
    CHECK(score(back, &e.image, &e.references[0], c) == score(m, &e.image, &e.references[0], c));
  }

  auto size = std::filesystem::file_size(dir.file("m.crt"));
  std::filesystem::copy_file(dir.file("m.crt"), dir.file("t.crt"));
  std::filesystem::resize_file(dir.file("t.crt"), size - 9);
  CHECK_THROWS_AS(load_model(dir.file("t.crt")), DataError);
  {
    std::ofstream out(dir.file("junk.crt"), std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(load_model(dir.file("junk.crt")), DataError);

  auto bigger = testing::small_vocab({"a", "b"});
  CHECK_THROWS_AS(load_model(dir.file("m.crt"), bigger.get()), ShapeError);

  // same size, different words
  auto words = f.ds.vocab->words();
  std::swap(words[0], words[1]);
  auto shuffled = Vocabulary::from_words(words);
  CHECK_THROWS_AS(load_model(dir.file("m.crt"), &shuffled), DataError);
}

TEST_CASE("initialization is deterministic") {
  Fixture f;
  auto a = make_model(f.cfg, *f.ds.vocab);
  auto b = make_model(f.cfg, *f.ds.vocab);
  auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  CHECK(a.parameter_count() > 0);
}
