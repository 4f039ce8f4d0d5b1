#include "aspectseed/pipeline.hpp"

#include <cstdio>
#include <iostream>
#include <set>

#include <json.hpp>

#include "aspectseed/error.hpp"
#include "aspectseed/table_io.hpp"

namespace aspectseed {

using ojson = nlohmann::ordered_json;

std::string to_string(Mode m) {
  switch (m) {
    case Mode::full: return "full";
    case Mode::no_iter: return "no_iter";
    case Mode::no_tuning: return "no_tuning";
    case Mode::no_filter: return "no_filter";
  }
  return "full";
}

Mode mode_from_string(const std::string& s) {
  if (s == "full") return Mode::full;
  if (s == "no_iter") return Mode::no_iter;
  if (s == "no_tuning") return Mode::no_tuning;
  if (s == "no_filter") return Mode::no_filter;
  throw ValidationError("unknown mode '" + s + "' (expected full, no_iter, no_tuning or no_filter)");
}

void RunConfig::validate() const {
  if (!(gamma_quantile > 0.0 && gamma_quantile < 1.0)) throw ValidationError("gamma_quantile must be in (0, 1)");
  if (!(kl_threshold >= 0.0)) throw ValidationError("kl_threshold must be non-negative");
  if (max_seeds == 0) throw ValidationError("max_seeds must be positive");
  if (max_iters == 0) throw ValidationError("max_iters must be positive");
  if (embedding.dim == 0) throw ValidationError("dim must be positive");
  if (min_count == 0) throw ValidationError("min_count must be positive");
  if (threads < 0) throw ValidationError("threads must be non-negative");
  classifier.validate();
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Reads optional typed keys from one JSON object and rejects the rest.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& obj, std::string prefix, RunConfig& cfg)
      : obj_(obj), prefix_(std::move(prefix)), cfg_(cfg) {
    if (!obj_.is_object()) throw ValidationError("config section '" + prefix_ + "' must be an object");
  }

  template <typename T>
  void read(const std::string& key, T& target, const std::string& source_key = {}) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      target = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("config key '" + prefix_ + key + "' has the wrong type");
    }
    cfg_.sources[source_key.empty() ? prefix_ + key : source_key] = "config";
  }

  void path(const std::string& key, std::filesystem::path& target, const std::filesystem::path& base) {
    std::string s;
    read(key, s);
    if (obj_.contains(key)) target = s.empty() ? std::filesystem::path{} : base / s;
  }

  void skip(const std::string& key) { seen_.insert(key); }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw ValidationError("unknown config key '" + prefix_ + key + "'");
    }
  }

 private:
  const nlohmann::json& obj_;
  std::string prefix_;
  RunConfig& cfg_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  ConfigReader top(doc, "", cfg);

  int version = kConfigSchemaVersion;
  top.read("schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ValidationError("unsupported config schema_version " + std::to_string(version));
  }
  top.path("corpus", cfg.corpus, base_dir);
  top.path("seeds", cfg.seeds, base_dir);
  top.path("embeddings", cfg.embeddings, base_dir);
  top.path("test", cfg.test, base_dir);
  top.path("out_dir", cfg.out_dir, base_dir);

  std::string mode = to_string(cfg.mode);
  top.read("mode", mode);
  cfg.mode = mode_from_string(mode);
  top.read("min_count", cfg.min_count);
  top.read("dim", cfg.embedding.dim);
  top.read("normalize_embeddings", cfg.normalize_embeddings);
  top.read("epochs", cfg.classifier.epochs);
  top.read("gamma_quantile", cfg.gamma_quantile);
  top.read("kl_threshold", cfg.kl_threshold);
  top.read("probe_max_segments", cfg.probe_max_segments);
  top.read("max_seeds", cfg.max_seeds);
  top.read("noisy_pool_size", cfg.noisy_pool_size);
  top.read("max_iters", cfg.max_iters);
  top.read("distinctive_include_misc", cfg.distinctive_include_misc);
  top.read("seed", cfg.seed);
  top.read("deterministic", cfg.deterministic);
  top.read("threads", cfg.threads);
  top.read("write_iteration_artifacts", cfg.write_iteration_artifacts);

  top.skip("embedding");
  if (doc.contains("embedding")) {
    ConfigReader emb(doc["embedding"], "embedding.", cfg);
    emb.read("window", cfg.embedding.window);
    emb.read("negatives", cfg.embedding.negatives);
    emb.read("epochs", cfg.embedding.epochs);
    emb.read("learning_rate", cfg.embedding.learning_rate);
    emb.read("subsample", cfg.embedding.subsample);
    emb.finish();
  }
  top.skip("classifier");
  if (doc.contains("classifier")) {
    ConfigReader cls(doc["classifier"], "classifier.", cfg);
    cls.read("batch_size", cfg.classifier.batch_size);
    cls.read("learning_rate", cfg.classifier.learning_rate);
    cls.read("dropout", cfg.classifier.dropout);
    cls.read("filters", cfg.classifier.filters);
    std::string opt = to_string(cfg.classifier.optimizer);
    cls.read("optimizer", opt);
    cfg.classifier.optimizer = optimizer_from_string(opt);
    bool fine_tune = false;
    cls.read("fine_tune_embeddings", fine_tune);
    if (fine_tune) throw ValidationError("classifier.fine_tune_embeddings: only frozen embeddings are supported");
    cls.finish();
  }
  top.finish();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text_file(path), path.parent_path());
}

SeedHistoryEntry history_entry(const SeedSets& seeds, const Vocabulary& vocab, std::span<const TokenId> noisy,
                               bool noisy_applied) {
  SeedHistoryEntry e;
  e.iteration = seeds.iteration;
  for (const auto& list : seeds.seeds) {
    std::vector<std::string> words;
    for (TokenId t : list) words.push_back(vocab.token(t));
    e.seeds.push_back(std::move(words));
  }
  for (TokenId t : noisy) e.noisy.push_back(vocab.token(t));
  e.noisy_applied = noisy_applied;
  return e;
}

namespace {

template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e.kind(), e.what());
  }
}

std::vector<std::size_t> argmax_all(std::span<const Distribution> probs) {
  std::vector<std::size_t> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(argmax(p));
  return out;
}

std::filesystem::path iteration_dir(const RunContext& ctx, std::size_t iteration) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "iter_%02zu", iteration);
  auto dir = ctx.artifact_dir / buf;
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

PipelineState run_iteration(const PipelineState& state, const RunContext& ctx, const RunConfig& cfg) {
  const auto policy = cfg.policy();
  const auto& corpus = ctx.corpus;
  const auto& vocab = corpus.vocabulary();
  const std::size_t k = state.seeds.k();
  const std::size_t it = state.iteration + 1;

  PipelineState next = state;
  next.iteration = it;
  IterationRecord record;
  record.iteration = it;

  const auto targets_k = stage("pseudo labels", [&] { return generate_all(corpus, state.seeds, ctx.table, policy); });

  // Same initialization every iteration, so iterations differ only in supervision.
  TrainConfig train_k = cfg.classifier;
  train_k.seed = derive_seed(cfg.seed, 0xc1a55ULL, 1);
  auto model_k = ClassifierModel::initialized(ctx.table.dim(), train_k.filters, k, train_k.dropout, train_k.seed);
  record.loss_k = stage("train K-aspect classifier",
                        [&] { return train(model_k, corpus, ctx.table, targets_k, train_k, policy).epoch_loss; });
  const auto pred_k = stage("predict K-aspect", [&] { return predict(model_k, corpus, ctx.table, policy); });

  const auto misc = stage("misc scores", [&] { return score_misc(pred_k, cfg.gamma_quantile); });
  record.gamma = misc.gamma;
  next.gamma = misc.gamma;
  const auto targets_k1 = stage("augment labels", [&] { return augment_all(pred_k, misc); });

  TrainConfig train_k1 = cfg.classifier;
  train_k1.seed = derive_seed(cfg.seed, 0xc1a55ULL, 2);
  auto model_k1 =
      ClassifierModel::initialized(ctx.table.dim(), train_k1.filters, k + 1, train_k1.dropout, train_k1.seed);
  record.loss_k1 = stage("train (K+1)-aspect classifier",
                         [&] { return train(model_k1, corpus, ctx.table, targets_k1, train_k1, policy).epoch_loss; });
  const auto pred_k1 = stage("predict (K+1)-aspect", [&] { return predict(model_k1, corpus, ctx.table, policy); });

  if (ctx.test) {
    stage("evaluate", [&] {
      const auto test_pred = argmax_all(predict(model_k1, *ctx.test, ctx.table, policy));
      const ConfusionMatrix cm(ctx.test_gold, test_pred, k + 1);
      record.metrics = macro_metrics(cm);
      std::vector<std::size_t> aspects_only(k);
      for (std::size_t j = 0; j < k; ++j) aspects_only[j] = j;
      record.metrics_no_misc = macro_metrics(cm, aspects_only);
      return 0;
    });
  }

  if (!ctx.artifact_dir.empty()) {
    stage("write iteration artifacts", [&] {
      const auto dir = iteration_dir(ctx, it);
      std::vector<std::string> k_names(ctx.class_names.begin(), ctx.class_names.begin() + static_cast<std::ptrdiff_t>(k));
      save_checkpoint(dir / "model_k.json", {model_k, train_k, ctx.fingerprint, k_names});
      save_checkpoint(dir / "model_k1.json", {model_k1, train_k1, ctx.fingerprint, ctx.class_names});
      write_predictions(dir / "pseudo_labels.tsv", targets_k, k_names);
      write_predictions(dir / "predictions_k1.tsv", pred_k1, ctx.class_names);
      write_misc_scores(dir / "misc_scores.csv", misc);
      return 0;
    });
  }

  next.model = std::move(model_k1);

  if (cfg.mode == Mode::no_iter) {
    next.records.push_back(std::move(record));
    return next;
  }

  const auto pool = stage("candidate pool", [&] {
    if (cfg.mode == Mode::no_tuning) return all_tokens_pool(corpus);
    return candidate_pool(model_k, corpus, ctx.table, {cfg.kl_threshold, cfg.probe_max_segments}, policy);
  });
  record.candidate_pool_size = pool.tokens.size();

  auto update = stage("seed update", [&] {
    const auto freq = aspect_frequencies(argmax_all(pred_k1), corpus, k + 1);
    const DistinctiveOptions dopts{cfg.distinctive_include_misc};
    std::vector<std::vector<ScoredCandidate>> ranked;
    for (std::size_t j = 0; j < k; ++j) ranked.push_back(rank_candidates(freq, pool, j, 0, vocab, dopts));
    const auto noisy = noisy_pool(freq, pool, cfg.noisy_pool_size, vocab, dopts);
    const bool apply_filter = cfg.mode != Mode::no_filter;
    auto u = update_seeds(state.seeds, ranked, apply_filter ? std::span<const TokenId>(noisy) : std::span<const TokenId>{},
                          cfg.max_seeds, vocab);
    if (!apply_filter) u.noisy = noisy;
    next.history.push_back(history_entry(u.seeds, vocab, u.noisy, apply_filter));
    return u;
  });
  record.warnings = update.warnings;
  next.converged = converged(state.seeds, update.seeds);
  record.converged = next.converged;
  next.seeds = std::move(update.seeds);
  next.records.push_back(std::move(record));
  return next;
}

RunResult run(const RunContext& ctx, const SeedFile& seed_file, const RunConfig& cfg) {
  cfg.validate();
  RunResult result;
  PipelineState state;
  state.seeds = resolve_seeds(seed_file, ctx.corpus.vocabulary(), &result.dropped_seeds);
  state.history.push_back(history_entry(state.seeds, ctx.corpus.vocabulary()));

  const std::size_t cap = cfg.mode == Mode::no_iter ? 1 : cfg.max_iters;
  for (std::size_t i = 0; i < cap; ++i) {
    state = run_iteration(state, ctx, cfg);
    if (state.converged) break;
  }

  const auto policy = cfg.policy();
  result.predictions = predict(*state.model, ctx.corpus, ctx.table, policy);
  if (ctx.test) result.test_predictions = predict(*state.model, *ctx.test, ctx.table, policy);
  result.state = std::move(state);
  return result;
}

namespace {

ojson report_json(const MetricReport& r, std::span<const std::string> names) {
  ojson per = ojson::object();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& s = r.per_class[c];
    per[names[c]] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support},
                     {"included", s.included}};
  }
  return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}, {"per_class", per}};
}

ojson history_json(const std::vector<SeedHistoryEntry>& history, std::span<const std::string> aspects) {
  ojson out = ojson::array();
  for (const auto& e : history) {
    ojson seeds = ojson::object();
    for (std::size_t j = 0; j < aspects.size() && j < e.seeds.size(); ++j) seeds[aspects[j]] = e.seeds[j];
    out.push_back({{"iteration", e.iteration}, {"seeds", seeds}, {"noisy_pool", e.noisy},
                   {"noisy_pool_applied", e.noisy_applied}});
  }
  return out;
}

}  // namespace

std::string seed_history_json(const std::vector<SeedHistoryEntry>& history, std::span<const std::string> aspects) {
  return history_json(history, aspects).dump(2) + "\n";
}

std::string manifest_json(const RunConfig& cfg, const RunContext& ctx, const RunResult& result) {
  auto src = [&](const std::string& key) {
    auto it = cfg.sources.find(key);
    return it == cfg.sources.end() ? std::string("default") : it->second;
  };
  ojson config = ojson::object();
  auto put = [&](const std::string& key, ojson value) { config[key] = {{"value", std::move(value)}, {"source", src(key)}}; };
  put("corpus", cfg.corpus.generic_string());
  put("seeds", cfg.seeds.generic_string());
  put("embeddings", cfg.embeddings.generic_string());
  put("test", cfg.test.generic_string());
  put("out_dir", cfg.out_dir.generic_string());
  put("mode", to_string(cfg.mode));
  put("min_count", cfg.min_count);
  put("dim", cfg.embedding.dim);
  put("embedding.window", cfg.embedding.window);
  put("embedding.negatives", cfg.embedding.negatives);
  put("embedding.epochs", cfg.embedding.epochs);
  put("embedding.learning_rate", cfg.embedding.learning_rate);
  put("embedding.subsample", cfg.embedding.subsample);
  put("normalize_embeddings", cfg.normalize_embeddings);
  put("epochs", cfg.classifier.epochs);
  put("classifier.batch_size", cfg.classifier.batch_size);
  put("classifier.learning_rate", cfg.classifier.learning_rate);
  put("classifier.dropout", cfg.classifier.dropout);
  put("classifier.filters", cfg.classifier.filters);
  put("classifier.optimizer", to_string(cfg.classifier.optimizer));
  put("gamma_quantile", cfg.gamma_quantile);
  put("kl_threshold", cfg.kl_threshold);
  put("probe_max_segments", cfg.probe_max_segments);
  put("max_seeds", cfg.max_seeds);
  put("noisy_pool_size", cfg.noisy_pool_size);
  put("max_iters", cfg.max_iters);
  put("distinctive_include_misc", cfg.distinctive_include_misc);
  put("seed", cfg.seed);
  put("deterministic", cfg.deterministic);
  put("threads", cfg.threads);
  put("write_iteration_artifacts", cfg.write_iteration_artifacts);

  ojson iterations = ojson::array();
  for (const auto& r : result.state.records) {
    ojson rec = {{"iteration", r.iteration},       {"gamma", r.gamma},
                 {"loss_k", r.loss_k},             {"loss_k1", r.loss_k1},
                 {"candidate_pool_size", r.candidate_pool_size}, {"converged", r.converged},
                 {"warnings", r.warnings}};
    if (r.metrics) rec["metrics"] = report_json(*r.metrics, ctx.class_names);
    if (r.metrics_no_misc) rec["metrics_no_misc"] = report_json(*r.metrics_no_misc, ctx.class_names);
    iterations.push_back(std::move(rec));
  }

  ojson doc;
  doc["schema_version"] = kConfigSchemaVersion;
  doc["config"] = config;
  doc["quantile_method"] = "linear interpolation between order statistics";
  doc["corpus"] = {{"segments", ctx.corpus.size()},
                   {"non_empty_segments", ctx.corpus.non_empty_count()},
                   {"vocabulary", ctx.corpus.vocabulary().size()},
                   {"tokens", ctx.corpus.token_count()}};
  doc["embedding_fingerprint"] = hex64(ctx.fingerprint);
  doc["classes"] = ctx.class_names;
  doc["dropped_seeds"] = result.dropped_seeds;
  doc["iterations"] = iterations;
  doc["seed_history"] = history_json(result.state.history, result.state.seeds.aspects);
  doc["converged"] = result.state.converged;
  doc["final_iteration"] = result.state.iteration;
  return doc.dump(2) + "\n";
}

RunContext make_context(Corpus corpus, const SeedFile& seed_file, std::span<const GoldExample> gold,
                        const RunConfig& cfg) {
  RunContext ctx;
  ctx.corpus = std::move(corpus);
  ctx.class_names = seed_file.aspects;
  ctx.class_names.push_back("misc");
  if (!gold.empty()) ctx.test_gold = label_indices(gold, ctx.class_names);

  if (!cfg.embeddings.empty()) {
    ctx.table = load_embeddings(cfg.embeddings, ctx.corpus.vocabulary(),
                                cfg.sources.contains("dim") ? cfg.embedding.dim : 0);
  } else {
    EmbeddingConfig ec = cfg.embedding;
    ec.seed = derive_seed(cfg.seed, 0xe3bULL);
    ctx.table = train_embeddings(ctx.corpus, ec, cfg.policy());
  }
  if (cfg.normalize_embeddings) ctx.table.normalize_rows();
  ctx.fingerprint = fingerprint(ctx.corpus.vocabulary(), ctx.table);

  if (!gold.empty()) {
    std::vector<std::string> lines;
    for (const auto& g : gold) lines.push_back(g.text);
    ctx.test = encode_with_vocabulary(lines, ctx.corpus.vocabulary());
  }
  return ctx;
}

RunResult run_from_files(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.corpus.empty()) throw ValidationError("no corpus given");
  if (cfg.seeds.empty()) throw ValidationError("no seed file given");

  auto corpus = load_corpus(cfg.corpus, {cfg.min_count});
  const auto seed_file = load_seed_file(cfg.seeds);
  std::vector<std::string> dropped;
  resolve_seeds(seed_file, corpus.vocabulary(), &dropped);
  for (const auto& w : dropped) std::cerr << "warning: seed '" << w << "' is not in the vocabulary; dropped\n";
  std::vector<GoldExample> gold;
  if (!cfg.test.empty()) gold = load_gold(cfg.test);

  RunContext ctx = make_context(std::move(corpus), seed_file, gold, cfg);

  std::filesystem::create_directories(cfg.out_dir);
  if (cfg.write_iteration_artifacts) ctx.artifact_dir = cfg.out_dir;

  auto result = run(ctx, seed_file, cfg);

  save_embeddings(cfg.out_dir / "embeddings.txt", ctx.corpus.vocabulary(), ctx.table);
  save_checkpoint(cfg.out_dir / "model.json", {*result.state.model, cfg.classifier, ctx.fingerprint, ctx.class_names});
  write_predictions(cfg.out_dir / "predictions.tsv", result.predictions, ctx.class_names);
  if (ctx.test) write_predictions(cfg.out_dir / "test_predictions.tsv", result.test_predictions, ctx.class_names);
  write_text_file(cfg.out_dir / "seed_history.json", seed_history_json(result.state.history, seed_file.aspects));
  write_text_file(cfg.out_dir / "manifest.json", manifest_json(cfg, ctx, result));
  return result;
}

}  // namespace aspectseed
