#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aspectseed/classifier.hpp"
#include "aspectseed/corpus.hpp"
#include "aspectseed/embeddings.hpp"
#include "aspectseed/evaluation.hpp"
#include "aspectseed/misc_handler.hpp"
#include "aspectseed/parallel.hpp"
#include "aspectseed/pseudo_label.hpp"
#include "aspectseed/seed_update.hpp"

namespace aspectseed {

enum class Mode { full, no_iter, no_tuning, no_filter };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path seeds;
  std::filesystem::path embeddings;  // empty: train on the corpus
  std::filesystem::path test;        // optional gold TSV
  std::filesystem::path out_dir = "out";

  Mode mode = Mode::full;
  std::size_t min_count = 2;
  EmbeddingConfig embedding;
  bool normalize_embeddings = false;
  TrainConfig classifier;

  double gamma_quantile = kDefaultGammaQuantile;
  double kl_threshold = kDefaultKlThreshold;
  std::size_t probe_max_segments = 0;
  std::size_t max_seeds = 10;
  std::size_t noisy_pool_size = 50;
  std::size_t max_iters = 10;
  bool distinctive_include_misc = true;

  std::uint64_t seed = 1;
  bool deterministic = false;
  int threads = 0;
  bool write_iteration_artifacts = true;

  // Where each knob's value came from: "default", "config" or "flag".
  std::map<std::string, std::string> sources;

  ExecPolicy policy() const { return ExecPolicy{threads, deterministic}; }
  void validate() const;
};

// Parses a JSON config. Relative paths resolve against base_dir. Unknown keys
// throw ValidationError.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

struct SeedHistoryEntry {
  std::size_t iteration = 0;
  std::vector<std::vector<std::string>> seeds;  // per aspect
  std::vector<std::string> noisy;
  bool noisy_applied = false;
};

struct IterationRecord {
  std::size_t iteration = 0;
  double gamma = 0.0;
  std::vector<double> loss_k;
  std::vector<double> loss_k1;
  std::size_t candidate_pool_size = 0;
  std::optional<MetricReport> metrics;          // K+1 classes, misc included
  std::optional<MetricReport> metrics_no_misc;  // pre-defined aspects only
  std::vector<std::string> warnings;
  bool converged = false;
};

struct PipelineState {
  std::size_t iteration = 0;
  SeedSets seeds;
  std::optional<ClassifierModel> model;  // latest (K+1)-aspect classifier
  double gamma = 0.0;
  std::vector<SeedHistoryEntry> history;
  std::vector<IterationRecord> records;
  bool converged = false;
};

// Everything an iteration reads. Built once per run.
struct RunContext {
  Corpus corpus;
  EmbeddingTable table;
  std::vector<std::string> class_names;  // aspects + "misc"
  std::optional<Corpus> test;
  std::vector<std::size_t> test_gold;
  std::filesystem::path artifact_dir;  // empty: no per-iteration artifacts
  std::uint64_t fingerprint = 0;       // of (vocabulary, table)
};

// One pass: aspect embeddings, K-aspect pseudo labels, K-aspect classifier,
// misc scores, (K+1)-aspect classifier, candidate pool, ranking, seed update.
// Errors are rethrown with the failing stage named.
PipelineState run_iteration(const PipelineState& state, const RunContext& context, const RunConfig& config);

SeedHistoryEntry history_entry(const SeedSets& seeds, const Vocabulary& vocab, std::span<const TokenId> noisy = {},
                               bool noisy_applied = false);

struct RunResult {
  PipelineState state;
  std::vector<Distribution> predictions;  // final model on the corpus
  std::vector<Distribution> test_predictions;
  std::vector<std::string> dropped_seeds;
};

// Loops run_iteration until the seeds converge or max_iters is reached
// (no_iter runs exactly one iteration and skips the seed update).
RunResult run(const RunContext& context, const SeedFile& seeds, const RunConfig& config);

// Trains (or loads, when config.embeddings is set) the embedding table and
// encodes the optional gold test set against the corpus vocabulary.
RunContext make_context(Corpus corpus, const SeedFile& seeds, std::span<const GoldExample> test,
                        const RunConfig& config);

// Builds the context from files, runs, and writes manifest.json,
// predictions.tsv, seed_history.json, model.json and embeddings.txt under out_dir.
RunResult run_from_files(const RunConfig& config);

// The run manifest as pretty-printed JSON.
std::string manifest_json(const RunConfig& config, const RunContext& context, const RunResult& result);
std::string seed_history_json(const std::vector<SeedHistoryEntry>& history, std::span<const std::string> aspects);

}  // namespace aspectseed
