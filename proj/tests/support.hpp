#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <aspectseed/corpus.hpp>
#include <aspectseed/embeddings.hpp>
#include <aspectseed/table_io.hpp>

#include <unistd.h>

namespace testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("aspectseed_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    auto p = path_ / name;
    aspectseed::write_text_file(p, content);
    return p;
  }

 private:
  std::filesystem::path path_;
};

// Vocabulary holding the given tokens in order (ids 1..n).
inline aspectseed::Vocabulary vocab_of(const std::vector<std::string>& tokens) {
  aspectseed::Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

// Table whose row i+1 is rows[i]; row 0 stays zero.
inline aspectseed::EmbeddingTable table_of(const std::vector<std::vector<double>>& rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  aspectseed::EmbeddingTable t(rows.size() + 1, dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = t.row(static_cast<aspectseed::TokenId>(i + 1));
    for (std::size_t k = 0; k < dim; ++k) r[k] = rows[i][k];
  }
  return t;
}

inline aspectseed::Corpus corpus_of(const std::vector<std::vector<aspectseed::TokenId>>& segments,
                                    aspectseed::Vocabulary vocab) {
  std::vector<aspectseed::TextSegment> segs;
  for (std::size_t i = 0; i < segments.size(); ++i) segs.push_back({i, segments[i], ""});
  return aspectseed::Corpus(std::move(segs), std::move(vocab));
}

}  // namespace testing
