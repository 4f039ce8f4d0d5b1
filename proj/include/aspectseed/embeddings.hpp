#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "aspectseed/corpus.hpp"
#include "aspectseed/parallel.hpp"

namespace aspectseed {

// Row-major table of d-dimensional vectors indexed by TokenId. Row 0 (UNK) is
// always zero.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }

  std::span<const double> row(TokenId id) const { return {data_.data() + std::size_t{id} * dim_, dim_}; }
  std::span<double> row(TokenId id) { return {data_.data() + std::size_t{id} * dim_, dim_}; }

  const std::vector<double>& data() const { return data_; }

  // Multiplies every vector by s (used by scale-invariance checks).
  void scale(double s);
  // Rescales every non-zero row to unit length.
  void normalize_rows();

  bool all_finite() const;

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Deterministic stand-in for tokens missing from a vector file:
// uniform(-0.5/d, 0.5/d) seeded by the FNV-1a hash of the token.
std::vector<double> fallback_vector(std::string_view token, std::size_t dim);

// Reads the plain-text "count dim" + "token v1 ... vd" format. Vocabulary tokens
// missing from the file get fallback_vector(). Throws ParseError (with line
// number) on malformed lines and ValidationError on dimension mismatch.
// expected_dim = 0 accepts the header's dimension.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::size_t expected_dim = 0);

// Reads a vector file and builds the vocabulary from its tokens in file order.
// Used by `predict`, where the file written by `run` is the only vocabulary source.
std::pair<Vocabulary, EmbeddingTable> load_vocabulary_and_embeddings(const std::filesystem::path& path);

// Writes every non-UNK row in id order with round-trip precision.
void save_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, const EmbeddingTable& table);

struct EmbeddingConfig {
  std::size_t dim = 200;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  // Frequent-word down-sampling threshold (word2vec's `sample`); 0 disables.
  double subsample = 0.0;
  std::uint64_t seed = 1;
};

// Skip-gram with negative sampling over the corpus segments (windows never
// cross segment boundaries). Single-threaded when policy is deterministic;
// otherwise segments are sharded lock-free across threads.
EmbeddingTable train_embeddings(const Corpus& corpus, const EmbeddingConfig& config,
                                const ExecPolicy& policy = ExecPolicy::serial());

// Hash over vocabulary tokens and vector bytes; checkpoints record it.
std::uint64_t fingerprint(const Vocabulary& vocab, const EmbeddingTable& table);

double dot(std::span<const double> a, std::span<const double> b);
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace aspectseed
