#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aspectseed {

using TokenId = std::uint32_t;

// Lowercases, splits on whitespace, strips '*' and '#', and splits punctuation
// off words. A run of adjacent punctuation becomes a single token (its first
// character). '_' is a word character so pre-joined phrases stay intact, and
// an apostrophe or hyphen between two word characters stays inside the word.
std::vector<std::string> tokenize(std::string_view raw);

// Bijective token <-> id map. Id 0 is the reserved UNK, which tokenize() can
// never produce.
class Vocabulary {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  // Returns the existing id when the token is already present.
  TokenId add(std::string_view token);

  // Id of the token, or kUnk if absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }

  // Includes UNK.
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TextSegment {
  std::size_t id = 0;
  std::vector<TokenId> tokens;
  std::string raw;

  // Segments that lost every token to preprocessing stay addressable but are
  // excluded from training.
  bool empty() const { return tokens.empty(); }

  friend bool operator==(const TextSegment&, const TextSegment&) = default;
};

struct CorpusOptions {
  std::size_t min_count = 2;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<TextSegment> segments, Vocabulary vocabulary);

  const std::vector<TextSegment>& segments() const { return segments_; }
  const TextSegment& segment(std::size_t i) const { return segments_.at(i); }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  std::size_t size() const { return segments_.size(); }
  std::size_t non_empty_count() const;
  std::size_t token_count() const;

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::vector<TextSegment> segments_;
  Vocabulary vocabulary_;
};

// Builds a corpus from raw lines. Blank lines (no tokens at all) are skipped
// and ids stay dense; tokens seen fewer than min_count times are dropped.
Corpus build_corpus(std::span<const std::string> lines, const CorpusOptions& options = {});

// One segment per line. Throws IoError if unreadable and ValidationError if no
// segment survives preprocessing.
Corpus load_corpus(const std::filesystem::path& path, const CorpusOptions& options = {});

// Encodes lines against a fixed vocabulary, keeping one segment per line (ids
// are line indices). Out-of-vocabulary tokens are dropped, so segments may be
// empty. Used for held-out and prediction inputs.
Corpus encode_with_vocabulary(std::span<const std::string> lines, const Vocabulary& vocabulary);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace aspectseed
