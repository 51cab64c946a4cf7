#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include "capcritic/augment.hpp"
#include "capcritic/corpus.hpp"
#include "capcritic/critic.hpp"
#include "capcritic/csv.hpp"
#include "capcritic/error.hpp"
#include "capcritic/evalstats.hpp"
#include "capcritic/metrics_baseline.hpp"
#include "capcritic/runtime.hpp"
#include "capcritic/trainer.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace capcritic;
using capcritic::cli::RunConfig;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

// Flags parsed into a scratch config; only the ones actually given are
// copied over the JSON-derived config.
class FlagSet {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help) {
    CLI::Option* opt = app->add_option(name, scratch_.*field, help);
    opt->default_val(defaults_.*field);
    scratch_.*field = defaults_.*field;
    overrides_.push_back({opt, [field](RunConfig& dst, const RunConfig& src) { dst.*field = src.*field; }});
    return opt;
  }

  void add_globals(CLI::App* app) {
    app->add_option("--config", config_path_, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    add(app, "--seed", &RunConfig::seed, "Seed for every random choice");
    add(app, "--threads", &RunConfig::threads, "Worker threads (1 = bit-reproducible)");
    add(app, "--out-dir", &RunConfig::out_dir, "Directory for outputs");
    CLI::Option* force = app->add_flag("--force", scratch_.force, "Overwrite existing outputs");
    overrides_.push_back({force, [](RunConfig& dst, const RunConfig& src) { dst.force = src.force; }});
  }

  RunConfig resolve(const std::function<void(RunConfig&)>& preset) const {
    RunConfig cfg;
    if (preset) preset(cfg);
    if (!config_path_.empty()) cli::apply_json(cfg, config_path_);
    for (const auto& [opt, copy] : overrides_) {
      if (opt->count() > 0) copy(cfg, scratch_);
    }
    return cfg;
  }

 private:
  RunConfig defaults_;
  RunConfig scratch_;
  std::string config_path_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const RunConfig&)>>> overrides_;
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError("missing " + what);
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
}

std::string output_path(const RunConfig& cfg, const std::string& name) {
  fs::path p(name);
  if (p.is_relative()) p = fs::path(cfg.out_dir) / p;
  if (fs::exists(p) && !cfg.force) throw ConfigError("output " + p.string() + " exists (pass --force to overwrite)");
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p.string();
}

std::shared_ptr<const Vocabulary> load_vocab(const RunConfig& cfg) {
  if (!cfg.vocab.empty()) {
    require_file(cfg.vocab, "vocabulary file");
    return std::make_shared<const Vocabulary>(read_vocabulary(cfg.vocab));
  }
  require_file(cfg.captions, "captions file");
  const auto texts = read_reference_texts(cfg.captions);
  return std::make_shared<const Vocabulary>(build_vocabulary(texts, cfg.max_vocab, cfg.min_freq));
}

Dataset load(const RunConfig& cfg) {
  require_file(cfg.captions, "captions file");
  require_file(cfg.features, "features file");
  auto vocab = load_vocab(cfg);
  return load_dataset(cfg.captions, cfg.features, vocab, cfg.t_max);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_build_vocab(const RunConfig& cfg, const std::string& out_name) {
  require_file(cfg.captions, "captions file");
  const auto texts = read_reference_texts(cfg.captions);
  const Vocabulary v = build_vocabulary(texts, cfg.max_vocab, cfg.min_freq);
  const std::string path = output_path(cfg, out_name);
  write_vocabulary(v, path);
  std::cout << "wrote " << v.size() << " entries to " << path << "\n";
  return 0;
}

int cmd_synth(const RunConfig& cfg, SynthConfig sc) {
  sc.seed = cfg.seed;
  sc.t_max = cfg.t_max;
  if (!cfg.generator.empty()) sc.generator_name = cfg.generator;
  const Dataset ds = synth_dataset(sc);
  const std::string captions = output_path(cfg, "captions.json");
  const std::string features = output_path(cfg, "features.cfv");
  const std::string vocab = output_path(cfg, "vocab.txt");
  write_dataset(ds, captions, features);
  write_vocabulary(*ds.vocab, vocab);
  std::cout << "wrote " << ds.size() << " images to " << captions << ", " << features << ", " << vocab << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& model_name, const std::string& val_captions,
              const std::string& val_features) {
  const Dataset ds = load(cfg);
  const TrainConfig tc = cli::train_config(cfg, ds.feature_dim());
  std::optional<Dataset> val;
  if (!val_captions.empty() || !val_features.empty()) {
    require_file(val_captions, "validation captions file");
    require_file(val_features, "validation features file");
    val = load_dataset(val_captions, val_features, ds.vocab, cfg.t_max, ds.feature_dim());
  }
  const std::string model_path = output_path(cfg, model_name);
  const std::string history_path = output_path(cfg, "history.csv");
  TrainResult result = train(ds, tc, val ? &*val : nullptr);
  save_model(result.model, model_path);
  write_history(result.history, history_path);
  std::cout << "final mean loss " << csv::format_double(result.history.back().mean_loss) << "\n";
  return 0;
}

CriticModel load_critic(const RunConfig& cfg, const Vocabulary& vocab) {
  require_file(cfg.model, "model file");
  return load_model(cfg.model, &vocab);
}

int cmd_score(const RunConfig& cfg) {
  const Dataset ds = load(cfg);
  CriticModel model = load_critic(cfg, *ds.vocab);
  std::vector<std::string> gens = cfg.generator.empty() ? ds.generator_names() : std::vector<std::string>{cfg.generator};
  if (gens.empty()) throw DataError("dataset has no generated captions to score");
  for (const auto& g : gens) {
    if (!ds.has_generator(g)) throw DataError("dataset has no captions from generator '" + g + "'");
  }
  const std::string path = output_path(cfg, "scores.csv");
  auto out = open_out(path);
  csv::write_row(out, {"image_id", "generator", "caption", "score"});
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& g : gens) {
    for (const auto& e : ds.images) {
      auto it = e.generated.find(g);
      if (it == e.generated.end()) continue;
      for (const auto& c : it->second) {
        const double s = score_with_all_references(model, &e.image, e.references, c);
        csv::write_row(out, {e.image.id, g, c.text, csv::format_double(s)});
        total += s;
        ++n;
      }
    }
  }
  std::cout << csv::format_double(total / static_cast<double>(n)) << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  if (cfg.generator.empty()) throw ConfigError("evaluate-generator needs --generator");
  const Dataset ds = load(cfg);
  TrainConfig tc = cli::train_config(cfg, ds.feature_dim());
  const TwoFoldResult r = two_fold_score(ds, cfg.generator, tc, cfg.replicas, cfg.threads);
  const std::string path = output_path(cfg, "evaluate_" + cfg.generator + ".csv");
  auto out = open_out(path);
  csv::write_row(out, {"image_id", "caption", "score"});
  for (const auto& s : r.scores) {
    const auto& e = ds.images[s.image];
    csv::write_row(out, {e.image.id, e.generated.at(cfg.generator)[s.caption].text, csv::format_double(s.score)});
  }
  std::cout << csv::format_double(r.mean_score) << "\n";
  return 0;
}

int cmd_robustness(const RunConfig& cfg) {
  const Dataset ds = load(cfg);
  std::optional<CriticModel> model;
  std::vector<std::unique_ptr<CaptionMetric>> metrics;
  for (const auto& name : cfg.metrics) {
    if (name == "critic") {
      if (!model) model.emplace(load_critic(cfg, *ds.vocab));
      metrics.push_back(std::make_unique<CriticMetric>(*model));
    } else {
      metrics.push_back(make_baseline_metric(name, ds));
    }
  }
  std::vector<TransformKind> kinds;
  for (const auto& t : cfg.transforms) kinds.push_back(parse_transform_kind(t));
  const std::string path = output_path(cfg, "robustness.csv");

  std::vector<RobustnessCurve> curves;
  for (auto& m : metrics) {
    const double human = human_mean_score(*m, ds);
    for (TransformKind k : kinds) curves.push_back(robustness_curve(*m, ds, k, cfg.gammas, cfg.seed, human));
  }
  write_robustness_csv(curves, path);
  std::cout << "metric";
  for (TransformKind k : kinds) std::cout << "\t" << to_string(k);
  std::cout << "\n";
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    std::cout << metrics[i]->name();
    for (std::size_t k = 0; k < kinds.size(); ++k) std::cout << "\t" << csv::format_double(curves[i * kinds.size() + k].auc);
    std::cout << "\n";
  }
  return 0;
}

double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("not a number in " + where + ": '" + s + "'");
  }
}

int cmd_correlate(const RunConfig& cfg, const std::string& input, const std::string& method, std::string human_col,
                  std::string metric_col, const std::string& out_name) {
  require_file(input, "correlation input");
  const csv::Table t = csv::read_file(input);
  if (human_col.empty()) human_col = t.column("human_score") >= 0 ? "human_score" : "human_M1";
  if (metric_col.empty()) metric_col = t.column("metric_score") >= 0 ? "metric_score" : "metric";
  const int hc = t.column(human_col), mc = t.column(metric_col);
  if (hc < 0) throw DataError("correlation input has no column '" + human_col + "'");
  if (mc < 0) throw DataError("correlation input has no column '" + metric_col + "'");
  std::vector<double> h, m;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = input + " row " + std::to_string(r + 2);
    h.push_back(parse_number(t.rows[r][static_cast<std::size_t>(hc)], where));
    m.push_back(parse_number(t.rows[r][static_cast<std::size_t>(mc)], where));
  }
  CorrelationReport rep;
  if (method == "kendall") {
    rep = kendall_tau(h, m);
  } else if (method == "pearson") {
    rep = pearson_rho(h, m);
  } else {
    throw ConfigError("unknown correlation method '" + method + "' (expected kendall or pearson)");
  }
  nlohmann::json j = {{"method", rep.method},
                      {"coefficient", rep.coefficient},
                      {"p_value", rep.p_value},
                      {"n", rep.n},
                      {"human_column", human_col},
                      {"metric_column", metric_col}};
  std::cout << j.dump(2) << "\n";
  if (!out_name.empty()) {
    auto out = open_out(output_path(cfg, out_name));
    out << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_baseline(const RunConfig& cfg) {
  const Dataset ds = load(cfg);
  std::vector<std::unique_ptr<CaptionMetric>> metrics;
  for (const auto& name : cfg.metrics) metrics.push_back(make_baseline_metric(name, ds));
  const std::vector<std::string> gens =
      cfg.generator.empty() ? ds.generator_names() : std::vector<std::string>{cfg.generator};

  struct Row {
    std::string image_id, source, caption;
  };
  std::vector<Row> rows;
  std::vector<MetricQuery> queries = human_queries(ds);
  for (const auto& q : queries) {
    const auto& e = *std::find_if(ds.images.begin(), ds.images.end(), [&](const ImageEntry& x) { return &x.image == q.image; });
    rows.push_back({e.image.id, "human", q.candidate->text});
  }
  for (const auto& g : gens) {
    if (!ds.has_generator(g)) throw DataError("dataset has no captions from generator '" + g + "'");
    for (const auto& e : ds.images) {
      auto it = e.generated.find(g);
      if (it == e.generated.end()) continue;
      for (const auto& c : it->second) {
        MetricQuery q{&e.image, {}, &c};
        for (const auto& r : e.references) q.references.push_back(&r);
        queries.push_back(std::move(q));
        rows.push_back({e.image.id, g, c.text});
      }
    }
  }
  const std::string path = output_path(cfg, "baseline.csv");
  auto out = open_out(path);
  csv::write_row(out, {"metric", "image_id", "source", "caption", "score"});
  for (auto& m : metrics) {
    const auto scores = m->score(queries);
    std::map<std::string, std::pair<double, std::size_t>> by_source;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      csv::write_row(out, {m->name(), rows[i].image_id, rows[i].source, rows[i].caption, csv::format_double(scores[i])});
      auto& acc = by_source[rows[i].source];
      acc.first += scores[i];
      ++acc.second;
    }
    for (const auto& [src, acc] : by_source) {
      std::cout << m->name() << "\t" << src << "\t" << csv::format_double(acc.first / static_cast<double>(acc.second)) << "\n";
    }
  }
  return 0;
}

int cmd_word_freq(const RunConfig& cfg) {
  const Dataset ds = load(cfg);
  std::vector<Caption> refs;
  for (const auto& e : ds.images) refs.insert(refs.end(), e.references.begin(), e.references.end());
  const auto ref_profile = word_frequency_profile(refs, *ds.vocab);
  const std::string path = output_path(cfg, "word_freq.csv");
  auto out = open_out(path);
  csv::write_row(out, {"source", "rank", "word", "frequency"});
  auto emit = [&](const std::string& source, const std::vector<WordFrequency>& p) {
    for (const auto& w : p) csv::write_row(out, {source, std::to_string(w.id + 1), w.word, csv::format_double(w.frequency)});
  };
  emit("human", ref_profile);
  const std::vector<std::string> gens =
      cfg.generator.empty() ? ds.generator_names() : std::vector<std::string>{cfg.generator};
  for (const auto& g : gens) {
    std::vector<Caption> caps;
    for (const auto& e : ds.images) {
      auto it = e.generated.find(g);
      if (it != e.generated.end()) caps.insert(caps.end(), it->second.begin(), it->second.end());
    }
    if (caps.empty()) throw DataError("dataset has no captions from generator '" + g + "'");
    const auto prof = word_frequency_profile(caps, *ds.vocab);
    emit(g, prof);
    std::cout << g << "\ttotal_variation\t" << csv::format_double(total_variation(ref_profile, prof)) << "\n";
  }
  return 0;
}

int cmd_transform(const RunConfig& cfg, const std::string& kind_name, double gamma, const std::string& text) {
  const auto vocab = load_vocab(cfg);
  const TransformKind kind = parse_transform_kind(kind_name);
  if (kind == TransformKind::RC) throw ConfigError("RC pairs captions across images; use the robustness command");
  const Caption c = encode_text(text, *vocab, cfg.t_max);
  const Caption t = kind == TransformKind::WP ? transform_wp(c, gamma, *vocab, cfg.seed)
                                              : transform_rw(c, gamma, *vocab, cfg.seed);
  std::cout << t.text << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  capcritic::retain_freed_memory();
  CLI::App app{"capcritic: learned caption critic and caption-metric toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::vector<std::unique_ptr<FlagSet>> flagsets;
  std::function<int()> action;

  auto sub = [&](const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    flagsets.push_back(std::make_unique<FlagSet>());
    flagsets.back()->add_globals(s);
    return std::make_pair(s, flagsets.back().get());
  };
  auto data_flags = [](CLI::App* s, FlagSet* f) {
    f->add(s, "--captions", &RunConfig::captions, "Captions JSON");
    f->add(s, "--features", &RunConfig::features, "Image features file");
    f->add(s, "--vocab", &RunConfig::vocab, "Vocabulary file (built from the captions when absent)");
    f->add(s, "--max-vocab", &RunConfig::max_vocab, "Vocabulary size limit when building");
    f->add(s, "--min-freq", &RunConfig::min_freq, "Minimum word count when building");
    f->add(s, "--t-max", &RunConfig::t_max, "Caption length limit");
  };
  auto train_flags = [](CLI::App* s, FlagSet* f) {
    f->add(s, "--generator", &RunConfig::generator, "Generator whose captions are negatives");
    f->add(s, "--embeddings", &RunConfig::embeddings, "Pretrained word vectors (word v1 v2 ...)");
    f->add(s, "--epochs", &RunConfig::epochs, "Training epochs");
    f->add(s, "--batch-size", &RunConfig::batch_size, "Batch size (even)");
    f->add(s, "--lr", &RunConfig::learning_rate, "Initial learning rate");
    f->add(s, "--lr-decay", &RunConfig::lr_decay, "Learning-rate factor per epoch");
    f->add(s, "--context", &RunConfig::context, "none | image | caption | image+caption");
    f->add(s, "--fusion", &RunConfig::fusion, "concat_linear | concat_mlp | cbp_linear");
    f->add(s, "--embed-dim", &RunConfig::embed_dim, "Word vector size");
    f->add(s, "--hidden", &RunConfig::hidden, "LSTM hidden size");
    f->add(s, "--layers", &RunConfig::layers, "LSTM layers (1-3)");
    f->add(s, "--mlp-hidden", &RunConfig::mlp_hidden, "Fusion MLP width");
    f->add(s, "--cbp-dim", &RunConfig::cbp_dim, "Compact bilinear pooling size (power of two)");
    f->add(s, "--negatives", &RunConfig::negatives, "Negative sources: generator rc wp rw mc all")->delimiter(',');
    f->add(s, "--gammas", &RunConfig::gammas, "Transform strengths")->delimiter(',');
  };

  {
    auto [s, f] = sub("build-vocab", "Build a vocabulary from reference captions");
    f->add(s, "--captions", &RunConfig::captions, "Captions JSON");
    f->add(s, "--max-vocab", &RunConfig::max_vocab, "Keep at most this many words");
    f->add(s, "--min-freq", &RunConfig::min_freq, "Drop words seen fewer times");
    auto out = std::make_shared<std::string>("vocab.txt");
    s->add_option("--out", *out, "Output file (relative to --out-dir)")->capture_default_str();
    s->callback([&, f = f, out] { action = [&, f, out] { return cmd_build_vocab(f->resolve(nullptr), *out); }; });
  }
  {
    auto [s, f] = sub("synth-data", "Write a synthetic topic-structured dataset");
    auto sc = std::make_shared<SynthConfig>();
    s->add_option("--images", sc->n_images, "Number of images")->capture_default_str();
    s->add_option("--words", sc->vocab_size, "Distinct content words")->capture_default_str();
    s->add_option("--image-dim", sc->image_dim, "Feature dimension")->capture_default_str();
    s->add_option("--topics", sc->n_topics, "Latent topics")->capture_default_str();
    f->add(s, "--generator", &RunConfig::generator, "Name of the synthetic generator");
    f->add(s, "--t-max", &RunConfig::t_max, "Caption length limit");
    s->callback([&, f = f, sc] { action = [f, sc] { return cmd_synth(f->resolve(nullptr), *sc); }; });
  }
  {
    auto [s, f] = sub("train", "Train a critic");
    data_flags(s, f);
    train_flags(s, f);
    auto model = std::make_shared<std::string>("model.crt");
    auto vc = std::make_shared<std::string>();
    auto vf = std::make_shared<std::string>();
    s->add_option("--model-out", *model, "Model file (relative to --out-dir)")->capture_default_str();
    s->add_option("--val-captions", *vc, "Held-out captions for the history file");
    s->add_option("--val-features", *vf, "Held-out features for the history file");
    s->callback([&, f = f, model, vc, vf] {
      action = [f, model, vc, vf] { return cmd_train(f->resolve(nullptr), *model, *vc, *vf); };
    });
  }
  {
    auto [s, f] = sub("score", "Score generated captions with a trained critic");
    data_flags(s, f);
    f->add(s, "--model", &RunConfig::model, "Model file");
    f->add(s, "--generator", &RunConfig::generator, "Only this generator (default: all)");
    s->callback([&, f = f] { action = [f] { return cmd_score(f->resolve(nullptr)); }; });
  }
  {
    auto [s, f] = sub("evaluate-generator", "Two-fold critic evaluation of one caption generator");
    data_flags(s, f);
    train_flags(s, f);
    f->add(s, "--replicas", &RunConfig::replicas, "Independent trainings to average");
    s->callback([&, f = f] {
      action = [f] { return cmd_evaluate(f->resolve([](RunConfig& c) { c.epochs = generator_eval_preset().epochs; })); };
    });
  }
  {
    auto [s, f] = sub("robustness", "Normalized metric scores under caption transforms");
    data_flags(s, f);
    f->add(s, "--model", &RunConfig::model, "Critic model (for the 'critic' metric)");
    f->add(s, "--metrics", &RunConfig::metrics, "critic bleu1..bleu4 rougeL cider")->delimiter(',');
    f->add(s, "--transforms", &RunConfig::transforms, "RC WP RW")->delimiter(',');
    f->add(s, "--gammas", &RunConfig::gammas, "Transform strengths, 0 to 1")->delimiter(',');
    s->callback([&, f = f] { action = [f] { return cmd_robustness(f->resolve(nullptr)); }; });
  }
  {
    auto [s, f] = sub("correlate", "Correlation between human judgments and a metric");
    auto input = std::make_shared<std::string>();
    auto method = std::make_shared<std::string>("kendall");
    auto hcol = std::make_shared<std::string>();
    auto mcol = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    s->add_option("--input", *input, "CSV: unit_id,human_score,metric_score or system,human_M1..,metric")->required();
    s->add_option("--method", *method, "kendall | pearson")->capture_default_str();
    s->add_option("--human-column", *hcol, "Human score column");
    s->add_option("--metric-column", *mcol, "Metric score column");
    s->add_option("--out", *out, "Also write the JSON report here");
    s->callback([&, f = f, input, method, hcol, mcol, out] {
      action = [f, input, method, hcol, mcol, out] {
        return cmd_correlate(f->resolve(nullptr), *input, *method, *hcol, *mcol, *out);
      };
    });
  }
  {
    auto [s, f] = sub("baseline", "BLEU / ROUGE-L / CIDEr for human and generated captions");
    data_flags(s, f);
    f->add(s, "--metrics", &RunConfig::metrics, "bleu1..bleu4 rougeL cider")->delimiter(',');
    f->add(s, "--generator", &RunConfig::generator, "Only this generator (default: all)");
    s->callback([&, f = f] { action = [f] { return cmd_baseline(f->resolve(nullptr)); }; });
  }
  {
    auto [s, f] = sub("word-freq", "Relative word frequencies of human and generated captions");
    data_flags(s, f);
    f->add(s, "--generator", &RunConfig::generator, "Only this generator (default: all)");
    s->callback([&, f = f] { action = [f] { return cmd_word_freq(f->resolve(nullptr)); }; });
  }
  {
    auto [s, f] = sub("transform", "Apply WP or RW to one caption");
    f->add(s, "--vocab", &RunConfig::vocab, "Vocabulary file");
    f->add(s, "--captions", &RunConfig::captions, "Captions JSON (vocabulary source when --vocab is absent)");
    f->add(s, "--t-max", &RunConfig::t_max, "Caption length limit");
    auto kind = std::make_shared<std::string>("WP");
    auto gamma = std::make_shared<double>(0.5);
    auto text = std::make_shared<std::string>();
    s->add_option("--kind", *kind, "WP | RW")->capture_default_str();
    s->add_option("--gamma", *gamma, "Strength in [0, 1]")->capture_default_str();
    s->add_option("--text", *text, "Caption text")->required();
    s->callback([&, f = f, kind, gamma, text] {
      action = [f, kind, gamma, text] { return cmd_transform(f->resolve(nullptr), *kind, *gamma, *text); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    return action();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
