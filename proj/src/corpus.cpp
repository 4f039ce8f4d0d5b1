#include "aspectseed/corpus.hpp"

#include <algorithm>
#include <fstream>

#include "aspectseed/error.hpp"

namespace aspectseed {
namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word_byte(unsigned char c) {
  return c >= 0x80 || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

bool is_joiner(unsigned char c) { return c == '\'' || c == '-'; }

}  // namespace

std::vector<std::string> tokenize(std::string_view raw) {
  std::string text;
  text.reserve(raw.size());
  for (unsigned char c : raw) {
    if (c == '*' || c == '#') continue;
    if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
    text.push_back(static_cast<char>(c));
  }

  std::vector<std::string> out;
  bool last_was_punct = false;
  auto emit_punct = [&](char c) {
    if (!last_was_punct) out.emplace_back(1, c);
    last_was_punct = true;
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (is_word_byte(c)) {
      std::size_t j = i;
      while (j < n) {
        const auto cj = static_cast<unsigned char>(text[j]);
        if (is_word_byte(cj)) {
          ++j;
        } else if (is_joiner(cj) && j + 1 < n && is_word_byte(static_cast<unsigned char>(text[j + 1]))) {
          ++j;
        } else {
          break;
        }
      }
      out.emplace_back(text.substr(i, j - i));
      last_was_punct = false;
      i = j;
      continue;
    }
    emit_punct(static_cast<char>(c));
    ++i;
  }
  return out;
}

Vocabulary::Vocabulary() { add(kUnkToken); }

TokenId Vocabulary::add(std::string_view token) {
  std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

Corpus::Corpus(std::vector<TextSegment> segments, Vocabulary vocabulary)
    : segments_(std::move(segments)), vocabulary_(std::move(vocabulary)) {
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].id != i) throw ValidationError("segment ids must be dense and in order");
    for (TokenId t : segments_[i].tokens) {
      if (t == Vocabulary::kUnk || t >= vocabulary_.size()) {
        throw ValidationError("segment " + std::to_string(i) + " holds an invalid token id");
      }
    }
  }
}

std::size_t Corpus::non_empty_count() const {
  return static_cast<std::size_t>(
      std::count_if(segments_.begin(), segments_.end(), [](const TextSegment& s) { return !s.empty(); }));
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : segments_) n += s.tokens.size();
  return n;
}

Corpus build_corpus(std::span<const std::string> lines, const CorpusOptions& options) {
  std::vector<std::vector<std::string>> tokenized;
  std::vector<const std::string*> raws;
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> first_seen;
  for (const auto& line : lines) {
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    for (const auto& t : toks) {
      if (counts[t]++ == 0) first_seen.push_back(t);
    }
    tokenized.push_back(std::move(toks));
    raws.push_back(&line);
  }

  Vocabulary vocab;
  for (const auto& t : first_seen) {
    if (counts[t] >= options.min_count) vocab.add(t);
  }

  std::vector<TextSegment> segments;
  segments.reserve(tokenized.size());
  for (std::size_t i = 0; i < tokenized.size(); ++i) {
    TextSegment seg;
    seg.id = i;
    seg.raw = *raws[i];
    for (const auto& t : tokenized[i]) {
      if (TokenId id = vocab.id(t); id != Vocabulary::kUnk) seg.tokens.push_back(id);
    }
    segments.push_back(std::move(seg));
  }
  Corpus corpus(std::move(segments), std::move(vocab));
  if (corpus.non_empty_count() == 0) throw ValidationError("corpus has no non-empty segment");
  return corpus;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw IoError("error while reading " + path.string());
  return lines;
}

Corpus load_corpus(const std::filesystem::path& path, const CorpusOptions& options) {
  const auto lines = read_lines(path);
  return build_corpus(lines, options);
}

Corpus encode_with_vocabulary(std::span<const std::string> lines, const Vocabulary& vocabulary) {
  std::vector<TextSegment> segments;
  segments.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    TextSegment seg;
    seg.id = i;
    seg.raw = lines[i];
    for (const auto& t : tokenize(lines[i])) {
      if (TokenId id = vocabulary.id(t); id != Vocabulary::kUnk) seg.tokens.push_back(id);
    }
    segments.push_back(std::move(seg));
  }
  return Corpus(std::move(segments), vocabulary);
}

}  // namespace aspectseed
