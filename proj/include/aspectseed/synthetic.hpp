#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "aspectseed/pseudo_label.hpp"

namespace aspectseed {

// Skip-gram epochs for runs on generated corpora. A few hundred short segments
// need many more passes than the library default before raw dot products
// separate the aspects.
inline constexpr std::size_t kSyntheticEmbeddingEpochs = 30;

struct SyntheticSpec {
  std::size_t k = 3;
  std::size_t segments_per_aspect = 200;
  double misc_fraction = 0.25;  // of the whole corpus
  std::size_t signature_size = 30;
  std::size_t background_size = 60;
  std::size_t out_of_scope_aspects = 2;
  std::size_t seeds_per_aspect = 5;
  std::size_t min_length = 6;
  std::size_t max_length = 12;
  std::size_t min_signature_words = 2;
  std::size_t max_signature_words = 4;
  // Chance that an aspect segment also carries one word of another aspect.
  double cross_talk = 0.05;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticSegment {
  std::string text;
  std::string label;  // aspect name or "misc"
};

struct SyntheticData {
  std::vector<std::string> aspects;
  std::vector<SyntheticSegment> train;
  std::vector<SyntheticSegment> test;
  SeedFile seeds;
  std::vector<std::vector<std::string>> signatures;  // per aspect
};

// Each aspect owns a disjoint signature vocabulary; aspect segments mix 2-4
// signature words with shared background words; misc segments are either
// background-only or built from out-of-scope signatures. Segments are shuffled
// and the last test_fraction is held out.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Majority vote over signature hits, misc when none: the learnability oracle.
std::string signature_oracle(const SyntheticData& data, const std::string& text);

}  // namespace aspectseed
