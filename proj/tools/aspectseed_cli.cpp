// Command-line front end: embed, run, predict, eval, synth, seeds.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "aspectseed/classifier.hpp"
#include "aspectseed/corpus.hpp"
#include "aspectseed/embeddings.hpp"
#include "aspectseed/error.hpp"
#include "aspectseed/evaluation.hpp"
#include "aspectseed/pipeline.hpp"
#include "aspectseed/synthetic.hpp"
#include "aspectseed/table_io.hpp"

namespace fs = std::filesystem;
using namespace aspectseed;

namespace {

// Knob flags shared by `embed` and `run`. Values land in RunConfig only when
// the flag was given, so config-file values survive otherwise.
struct KnobFlags {
  std::string config;
  std::string mode;
  double gamma_quantile = 0;
  double kl_threshold = 0;
  std::size_t max_seeds = 0;
  std::size_t noisy_pool_size = 0;
  std::size_t max_iters = 0;
  std::size_t epochs = 0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;

  void attach(CLI::App* app, bool with_config_required) {
    auto* c = app->add_option("--config", config, "JSON run config");
    if (with_config_required) c->required()->check(CLI::ExistingFile);
    app->add_option("--mode", mode, "full, no_iter, no_tuning or no_filter")
        ->check(CLI::IsMember({"full", "no_iter", "no_tuning", "no_filter"}));
    app->add_option("--gamma-quantile", gamma_quantile, "quantile of H_norm used as gamma (0.75)");
    app->add_option("--kl-threshold", kl_threshold, "UNK-ablation KL gate for candidates (0.05)");
    app->add_option("--max-seeds", max_seeds, "seed words kept per aspect (10)");
    app->add_option("--noisy-pool-size", noisy_pool_size, "top misc words excluded from seeds (50)");
    app->add_option("--max-iters", max_iters, "iteration cap (10)");
    app->add_option("--epochs", epochs, "classifier epochs (5)");
    app->add_option("--dim", dim, "embedding dimension (200)");
    app->add_option("--seed", seed, "RNG seed");
    app->add_flag("--deterministic", "single-threaded reproducible numerics");
    app->add_option("--out-dir", out_dir, "output directory");
    app->add_option("--threads", threads, "worker threads (0: OpenMP default)");
  }

  void apply(const CLI::App* app, RunConfig& cfg) const {
    auto given = [&](const char* flag) { return app->count(flag) > 0; };
    auto mark = [&](const char* key) { cfg.sources[key] = "flag"; };
    if (given("--mode")) cfg.mode = mode_from_string(mode), mark("mode");
    if (given("--gamma-quantile")) cfg.gamma_quantile = gamma_quantile, mark("gamma_quantile");
    if (given("--kl-threshold")) cfg.kl_threshold = kl_threshold, mark("kl_threshold");
    if (given("--max-seeds")) cfg.max_seeds = max_seeds, mark("max_seeds");
    if (given("--noisy-pool-size")) cfg.noisy_pool_size = noisy_pool_size, mark("noisy_pool_size");
    if (given("--max-iters")) cfg.max_iters = max_iters, mark("max_iters");
    if (given("--epochs")) cfg.classifier.epochs = epochs, mark("epochs");
    if (given("--dim")) cfg.embedding.dim = dim, mark("dim");
    if (given("--seed")) cfg.seed = seed, mark("seed");
    if (given("--deterministic")) cfg.deterministic = true, mark("deterministic");
    if (given("--out-dir")) cfg.out_dir = out_dir, mark("out_dir");
    if (given("--threads")) cfg.threads = threads, mark("threads");
  }
};

RunConfig base_config(const KnobFlags& flags) {
  return flags.config.empty() ? RunConfig{} : load_run_config(flags.config);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

int cmd_embed(const CLI::App* app, const KnobFlags& flags, const std::string& corpus_path, std::size_t embed_epochs) {
  RunConfig cfg = base_config(flags);
  flags.apply(app, cfg);
  if (!corpus_path.empty()) cfg.corpus = corpus_path;
  if (app->count("--embed-epochs")) cfg.embedding.epochs = embed_epochs;
  if (cfg.corpus.empty()) throw ValidationError("embed needs --corpus or a config with 'corpus'");
  cfg.validate();
  const auto corpus = load_corpus(cfg.corpus, {cfg.min_count});
  EmbeddingConfig ec = cfg.embedding;
  ec.seed = derive_seed(cfg.seed, 0xe3bULL);
  const auto table = train_embeddings(corpus, ec, cfg.policy());
  fs::create_directories(cfg.out_dir);
  const auto out = cfg.out_dir / "embeddings.txt";
  save_embeddings(out, corpus.vocabulary(), table);
  std::cout << "wrote " << out.string() << " (" << corpus.vocabulary().size() - 1 << " vectors, dim " << table.dim()
            << ", fingerprint " << hex64(fingerprint(corpus.vocabulary(), table)) << ")\n";
  return 0;
}

int cmd_run(const CLI::App* app, const KnobFlags& flags) {
  RunConfig cfg = base_config(flags);
  flags.apply(app, cfg);
  const auto result = run_from_files(cfg);
  for (const auto& rec : result.state.records) {
    std::cerr << "iteration " << rec.iteration << ": gamma " << rec.gamma << ", candidates " << rec.candidate_pool_size;
    if (rec.metrics) std::cerr << ", macro-F1 " << rec.metrics->f1;
    std::cerr << (rec.converged ? ", converged" : "") << '\n';
    for (const auto& w : rec.warnings) std::cerr << "warning: " << w << '\n';
  }
  std::cout << "wrote " << (cfg.out_dir / "manifest.json").string() << '\n';
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& embeddings_path, const std::string& input_path,
                bool gold_input, const std::string& out_dir) {
  auto [vocab, table] = load_vocabulary_and_embeddings(embeddings_path);
  const auto ck = load_checkpoint(model_path, fingerprint(vocab, table));
  std::vector<std::string> lines;
  if (gold_input) {
    for (const auto& g : load_gold(input_path)) lines.push_back(g.text);
  } else {
    lines = read_lines(input_path);
  }
  const auto corpus = encode_with_vocabulary(lines, vocab);
  const auto probs = predict(ck.model, corpus, table);
  fs::create_directories(out_dir);
  const auto out = fs::path(out_dir) / "predictions.tsv";
  write_predictions(out, probs, ck.class_names);
  std::cout << "wrote " << out.string() << " (" << probs.size() << " rows)\n";
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gold_path, const std::string& out_dir) {
  const auto pred = read_predictions(pred_path);
  const auto gold = load_gold(gold_path);
  const auto gold_idx = label_indices(gold, pred.class_names);
  std::vector<std::size_t> g, p;
  for (std::size_t r = 0; r < pred.ids.size(); ++r) {
    if (pred.ids[r] >= gold.size()) throw ValidationError("prediction id " + std::to_string(pred.ids[r]) + " has no gold row");
    auto it = std::find(pred.class_names.begin(), pred.class_names.end(), pred.labels[r]);
    if (it == pred.class_names.end()) throw ValidationError("unknown predicted label '" + pred.labels[r] + "'");
    g.push_back(gold_idx[pred.ids[r]]);
    p.push_back(static_cast<std::size_t>(it - pred.class_names.begin()));
  }
  if (g.size() != gold.size()) {
    throw ValidationError("gold has " + std::to_string(gold.size()) + " rows, predictions " + std::to_string(g.size()));
  }
  const ConfusionMatrix cm(g, p, pred.class_names.size());
  const auto all = macro_metrics(cm);
  std::cout << format_report(all, pred.class_names);

  nlohmann::ordered_json doc;
  doc["macro"] = {{"precision", all.precision}, {"recall", all.recall}, {"f1", all.f1}};
  const auto misc_it = std::find(pred.class_names.begin(), pred.class_names.end(), "misc");
  if (misc_it != pred.class_names.end()) {
    std::vector<std::size_t> aspects;
    for (std::size_t c = 0; c < pred.class_names.size(); ++c) {
      if (pred.class_names[c] != "misc") aspects.push_back(c);
    }
    const auto no_misc = macro_metrics(cm, aspects);
    std::printf("macro without misc: precision %.4f  recall %.4f  f1 %.4f\n", no_misc.precision, no_misc.recall,
                no_misc.f1);
    doc["macro_no_misc"] = {{"precision", no_misc.precision}, {"recall", no_misc.recall}, {"f1", no_misc.f1}};
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "metrics.json", doc.dump(2) + "\n");
  }
  return 0;
}

int cmd_synth(SyntheticSpec spec, const std::string& out_dir) {
  const auto data = generate_synthetic(spec);
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::string corpus, train_gold, test;
  for (const auto& s : data.train) {
    corpus += s.text + "\n";
    train_gold += s.label + "\t" + s.text + "\n";
  }
  for (const auto& s : data.test) test += s.label + "\t" + s.text + "\n";
  write_text_file(dir / "corpus.txt", corpus);
  write_text_file(dir / "train_gold.tsv", train_gold);
  write_text_file(dir / "test.tsv", test);

  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  for (std::size_t j = 0; j < data.aspects.size(); ++j) seeds[data.aspects[j]] = data.seeds.seeds[j];
  write_text_file(dir / "seeds.json", seeds.dump(2) + "\n");

  nlohmann::ordered_json config = {{"schema_version", kConfigSchemaVersion},
                                   {"corpus", "corpus.txt"},
                                   {"seeds", "seeds.json"},
                                   {"test", "test.tsv"},
                                   {"out_dir", "run"},
                                   {"seed", spec.seed},
                                   {"embedding", {{"epochs", kSyntheticEmbeddingEpochs}}}};
  write_text_file(dir / "config.json", config.dump(2) + "\n");
  std::cout << "wrote " << data.train.size() << " training and " << data.test.size() << " test segments to "
            << dir.string() << '\n';
  return 0;
}

int cmd_seeds(const std::string& path) {
  const auto doc = nlohmann::ordered_json::parse(read_text_file(path));
  const auto& history = doc.is_object() && doc.contains("seed_history") ? doc["seed_history"] : doc;
  if (!history.is_array()) throw ValidationError(path + ": expected a seed history array");
  for (const auto& entry : history) {
    std::cout << "iteration " << entry.at("iteration").get<std::size_t>() << '\n';
    for (const auto& [aspect, words] : entry.at("seeds").items()) {
      std::cout << "  " << aspect << ":";
      for (const auto& w : words) std::cout << ' ' << w.get<std::string>();
      std::cout << '\n';
    }
    const auto& noisy = entry.at("noisy_pool");
    if (!noisy.empty()) {
      std::cout << "  noisy" << (entry.value("noisy_pool_applied", false) ? "" : " (not applied)") << ":";
      for (const auto& w : noisy) std::cout << ' ' << w.get<std::string>();
      std::cout << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seed-word driven aspect classification with an induced misc aspect"};
  app.require_subcommand(1);

  KnobFlags embed_flags;
  std::string embed_corpus;
  std::size_t embed_epochs = 5;
  auto* embed = app.add_subcommand("embed", "train skip-gram embeddings on a corpus");
  embed_flags.attach(embed, false);
  embed->add_option("--corpus", embed_corpus, "one segment per line")->check(CLI::ExistingFile);
  embed->add_option("--embed-epochs", embed_epochs, "embedding training epochs (5)");

  KnobFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "run the iterative pipeline from a config file");
  run_flags.attach(run_cmd, true);

  std::string model_path, embeddings_path, input_path, predict_out = "predictions";
  bool gold_input = false;
  auto* predict_cmd = app.add_subcommand("predict", "apply a checkpoint to a corpus");
  predict_cmd->add_option("--model", model_path, "checkpoint (model.json)")->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--embeddings", embeddings_path, "vector file written by run")
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--corpus", input_path, "one segment per line")->required()->check(CLI::ExistingFile);
  predict_cmd->add_flag("--gold-input", gold_input, "input is a label<TAB>text file");
  predict_cmd->add_option("--out-dir", predict_out, "output directory");

  std::string pred_path, gold_path, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold labels");
  eval_cmd->add_option("--pred", pred_path, "predictions TSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gold", gold_path, "label<TAB>text TSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out-dir", eval_out, "also write metrics.json here");

  SyntheticSpec spec;
  std::string synth_out = "synthetic";
  auto* synth = app.add_subcommand("synth", "write a synthetic benchmark");
  synth->add_option("--k", spec.k, "pre-defined aspects (3)");
  synth->add_option("--seed", spec.seed, "RNG seed (7)");
  synth->add_option("--segments-per-aspect", spec.segments_per_aspect, "segments per aspect (200)");
  synth->add_option("--misc-fraction", spec.misc_fraction, "misc share of the corpus (0.25)");
  synth->add_option("--test-fraction", spec.test_fraction, "held-out share (0.2)");
  synth->add_option("--out-dir", synth_out, "output directory");

  std::string history_path;
  auto* seeds_cmd = app.add_subcommand("seeds", "pretty-print a seed history");
  seeds_cmd->add_option("--history", history_path, "seed_history.json or manifest.json")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error\tusage\t" << e.what() << '\n';
    return 2;
  }

  try {
    if (embed->parsed()) return cmd_embed(embed, embed_flags, embed_corpus, embed_epochs);
    if (run_cmd->parsed()) return cmd_run(run_cmd, run_flags);
    if (predict_cmd->parsed()) return cmd_predict(model_path, embeddings_path, input_path, gold_input, predict_out);
    if (eval_cmd->parsed()) return cmd_eval(pred_path, gold_path, eval_out);
    if (synth->parsed()) return cmd_synth(spec, synth_out);
    if (seeds_cmd->parsed()) return cmd_seeds(history_path);
  } catch (const Error& e) {
    std::cerr << "error\t" << e.kind() << '\t' << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error\tparse\t" << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error\tinternal\t" << e.what() << '\n';
    return 1;
  }
  return 1;
}
