#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aspectseed/classifier.hpp"
#include "aspectseed/corpus.hpp"
#include "aspectseed/parallel.hpp"
#include "aspectseed/pseudo_label.hpp"

namespace aspectseed {

inline constexpr double kDefaultKlThreshold = 0.05;

// Segment-level counts from argmax predictions. Classes 0..K-1 are the
// pre-defined aspects and class K is misc.
class AspectFrequencyTable {
 public:
  AspectFrequencyTable(std::size_t classes, std::size_t vocab_size);

  std::size_t classes() const { return aspect_.size(); }
  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t aspect_count(std::size_t cls) const { return aspect_.at(cls); }
  std::size_t word_count(std::size_t cls, TokenId w) const { return word_.at(cls * vocab_size_ + w); }

  void add_segment(std::size_t cls, std::span<const TokenId> tokens);

 private:
  std::size_t vocab_size_;
  std::vector<std::size_t> aspect_;
  std::vector<std::size_t> word_;
};

AspectFrequencyTable aspect_frequencies(std::span<const std::size_t> predicted, const Corpus& corpus,
                                        std::size_t classes);

struct CandidatePool {
  std::vector<TokenId> tokens;  // ascending id
  std::vector<double> max_shift;  // parallel to tokens: largest KL observed

  bool contains(TokenId w) const;
};

struct ProbeOptions {
  double threshold = kDefaultKlThreshold;
  // 0 probes every non-empty segment; otherwise an evenly spaced subset of this size.
  std::size_t max_segments = 0;
};

// Replaces each distinct token of each segment by UNK, re-runs the K-aspect
// model and keeps tokens whose KL(original || ablated) exceeds the threshold
// in at least one segment.
CandidatePool candidate_pool(const ClassifierModel& model, const Corpus& corpus, const EmbeddingTable& table,
                             const ProbeOptions& options = {}, const ExecPolicy& policy = {});
CandidatePool candidate_pool_serial(const ClassifierModel& model, const Corpus& corpus, const EmbeddingTable& table,
                                    const ProbeOptions& options = {});
// Every non-UNK token that occurs in the corpus (the ablation gate bypassed).
CandidatePool all_tokens_pool(const Corpus& corpus);

// f_{A_j,w} / f_{A_j}; 0 when the aspect received no segments.
double indicative(const AspectFrequencyTable& table, std::size_t aspect, TokenId w);

struct DistinctiveOptions {
  // Whether misc (class K) is among the "other aspects" when scoring a
  // pre-defined aspect. Misc itself is always scored against pre-defined aspects only.
  bool include_misc = true;
};

// f_{A_j,w} / max(1, max_{k != j} f_{A_k,w}).
double distinctive(const AspectFrequencyTable& table, std::size_t aspect, TokenId w,
                   const DistinctiveOptions& options = {});

struct ScoredCandidate {
  TokenId token = 0;
  double indicative = 0.0;
  double distinctive = 0.0;
  double aggregate = 0.0;  // sqrt(indicative * distinctive)
  std::size_t count = 0;   // f_{A_j,w}
};

// Candidates with both scores positive, by aggregate desc, then count desc,
// then token string asc. max_seeds = 0 keeps the full list.
std::vector<ScoredCandidate> rank_candidates(const AspectFrequencyTable& table, const CandidatePool& pool,
                                             std::size_t aspect, std::size_t max_seeds, const Vocabulary& vocab,
                                             const DistinctiveOptions& options = {});

// Top-M candidates under the misc aspect (class K).
std::vector<TokenId> noisy_pool(const AspectFrequencyTable& table, const CandidatePool& pool, std::size_t m,
                                const Vocabulary& vocab, const DistinctiveOptions& options = {});

struct SeedUpdate {
  SeedSets seeds;
  // Noisy pool after removing any token carried over by a fallback.
  std::vector<TokenId> noisy;
  std::vector<std::string> warnings;
};

// Per aspect: drop noisy tokens, give each contested token to the aspect with
// the highest aggregate (ties to the lower index), truncate to max_seeds. An
// aspect left empty keeps its previous seed set.
SeedUpdate update_seeds(const SeedSets& previous, std::span<const std::vector<ScoredCandidate>> ranked,
                        std::span<const TokenId> noisy, std::size_t max_seeds, const Vocabulary& vocab);

// True iff every aspect's seed set is equal as an unordered set.
bool converged(const SeedSets& old_seeds, const SeedSets& new_seeds);

}  // namespace aspectseed
