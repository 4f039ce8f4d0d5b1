#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aspectseed/corpus.hpp"
#include "aspectseed/embeddings.hpp"
#include "aspectseed/parallel.hpp"

namespace aspectseed {

// Probability vector over K (or K+1) aspects; index = aspect index.
using Distribution = std::vector<double>;

// Per-aspect seed lists. Aspect order is the index order everywhere.
struct SeedSets {
  std::vector<std::string> aspects;
  std::vector<std::vector<TokenId>> seeds;
  std::size_t iteration = 0;

  std::size_t k() const { return aspects.size(); }

  // K >= 2, every list non-empty and duplicate-free, lists pairwise disjoint,
  // every id a non-UNK vocabulary entry. Throws ValidationError otherwise.
  void validate(const Vocabulary& vocab) const;

  friend bool operator==(const SeedSets&, const SeedSets&) = default;
};

// Seed file as read from disk, before vocabulary resolution.
struct SeedFile {
  std::vector<std::string> aspects;
  std::vector<std::vector<std::string>> seeds;
};

// JSON object aspect -> [tokens]; key order is aspect order. Duplicate seeds
// within or across aspects are rejected.
SeedFile load_seed_file(const std::filesystem::path& path);
SeedFile parse_seed_json(const std::string& text);

// Resolves tokens against the vocabulary. Unknown tokens are dropped and
// reported through `dropped`; an aspect left with no seed is an error.
SeedSets resolve_seeds(const SeedFile& file, const Vocabulary& vocab, std::vector<std::string>* dropped = nullptr);

using AspectEmbeddings = std::vector<std::vector<double>>;

// Mean of the seed vectors. Throws ValidationError on an empty list.
std::vector<double> aspect_embedding(std::span<const TokenId> seeds, const EmbeddingTable& table);
AspectEmbeddings aspect_embeddings(const SeedSets& seeds, const EmbeddingTable& table);

// max_j a_j . e_w, clamped below at 0.
double attention_weight(std::span<const double> token_vector, const AspectEmbeddings& aspects);

// Attention-weighted mean of the token vectors; plain mean when every weight
// is 0. The segment must have at least one token.
std::vector<double> segment_representation(std::span<const TokenId> tokens, const AspectEmbeddings& aspects,
                                           const EmbeddingTable& table);

// softmax_j(a_j . z), stabilised by subtracting the max logit.
Distribution pseudo_labels(std::span<const double> z, const AspectEmbeddings& aspects);

// Numerically stable softmax of arbitrary logits.
Distribution softmax(std::span<const double> logits);

// One K-length distribution per segment, uniform for empty segments.
std::vector<Distribution> generate_all(const Corpus& corpus, const SeedSets& seeds, const EmbeddingTable& table,
                                       const ExecPolicy& policy = {});
// Serial reference for generate_all.
std::vector<Distribution> generate_all_serial(const Corpus& corpus, const SeedSets& seeds,
                                              const EmbeddingTable& table);

std::size_t argmax(std::span<const double> values);

}  // namespace aspectseed
