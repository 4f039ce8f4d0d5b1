#include <doctest.h>

#include <cmath>

#include <aspectseed/embeddings.hpp>
#include <aspectseed/error.hpp>
#include <aspectseed/rng.hpp>

#include "support.hpp"

using namespace aspectseed;

namespace {

// Two topics that never share a segment; within a topic "a"/"b" and "c"/"d"
// always appear together.
Corpus two_topic_corpus(std::size_t n = 300) {
  Rng rng(3);
  const std::vector<std::string> left{"l1", "l2", "l3", "l4"};
  const std::vector<std::string> right{"r1", "r2", "r3", "r4"};
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < n; ++i) {
    const bool first = i % 2 == 0;
    const auto& pool = first ? left : right;
    std::string line = first ? "a b" : "c d";
    for (int k = 0; k < 4; ++k) line += " " + pool[rng.below(pool.size())];
    lines.push_back(line);
  }
  return build_corpus(lines);
}

}  // namespace

TEST_CASE("fallback vectors are deterministic, bounded and token specific") {
  const auto a = fallback_vector("pasta", 200);
  CHECK(a.size() == 200);
  CHECK(a == fallback_vector("pasta", 200));
  CHECK(a != fallback_vector("pizza", 200));
  for (double x : a) {
    CHECK(x >= -0.5 / 200);
    CHECK(x < 0.5 / 200);
  }
}

TEST_CASE("load_embeddings passes vectors through and fills gaps") {
  testing::TempDir dir("emb");
  const auto v = testing::vocab_of({"food", "missing"});
  const auto p = dir.write("v.txt", "3 3\nfood 0.5 -1 2.25\nother 1 1 1\n<unk> 9 9 9\n");
  const auto t = load_embeddings(p, v);
  REQUIRE(t.dim() == 3);
  REQUIRE(t.rows() == 3);
  CHECK(t.row(1)[0] == 0.5);
  CHECK(t.row(1)[1] == -1.0);
  CHECK(t.row(1)[2] == 2.25);
  const auto fb = fallback_vector("missing", 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(t.row(2)[k] == fb[k]);
  for (double x : t.row(Vocabulary::kUnk)) CHECK(x == 0.0);
  CHECK(load_embeddings(p, v) == t);
}

TEST_CASE("a 200-dimensional file yields 200-long rows verbatim") {
  testing::TempDir dir("emb");
  std::string line = "1 200\nw";
  std::vector<double> expect;
  for (int k = 0; k < 200; ++k) {
    expect.push_back(k * 0.01 - 1.0);
    line += " " + std::to_string(expect.back());
  }
  const auto p = dir.write("v.txt", line + "\n");
  const auto t = load_embeddings(p, testing::vocab_of({"w"}), 200);
  REQUIRE(t.row(1).size() == 200);
  for (int k = 0; k < 200; ++k) CHECK(t.row(1)[k] == doctest::Approx(expect[k]).epsilon(1e-12));
}

TEST_CASE("malformed vector files raise errors with line numbers") {
  testing::TempDir dir("emb");
  const auto v = testing::vocab_of({"a"});
  try {
    load_embeddings(dir.write("bad.txt", "2 2\na 1 2\nb 1 oops\n"), v);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_embeddings(dir.write("short.txt", "1 2\na 1\n"), v), ParseError);
  CHECK_THROWS_AS(load_embeddings(dir.write("hdr.txt", "x y\n"), v), ParseError);
  CHECK_THROWS_AS(load_embeddings(dir.write("empty.txt", ""), v), ParseError);
  CHECK_THROWS_AS(load_embeddings(dir.write("count.txt", "2 2\na 1 2\n"), v), ValidationError);
  CHECK_THROWS_AS(load_embeddings(dir.write("dim.txt", "1 2\na 1 2\n"), v, 3), ValidationError);
  CHECK_THROWS_AS(load_embeddings(dir / "none.txt", v), IoError);
}

TEST_CASE("save and reload round-trips exactly") {
  testing::TempDir dir("emb");
  const auto c = two_topic_corpus(40);
  EmbeddingConfig cfg;
  cfg.dim = 8;
  cfg.epochs = 2;
  const auto t = train_embeddings(c, cfg);
  save_embeddings(dir / "v.txt", c.vocabulary(), t);
  CHECK(load_embeddings(dir / "v.txt", c.vocabulary()) == t);
  const auto [vocab, table] = load_vocabulary_and_embeddings(dir / "v.txt");
  CHECK(vocab == c.vocabulary());
  CHECK(table == t);
  CHECK(fingerprint(vocab, table) == fingerprint(c.vocabulary(), t));
}

TEST_CASE("trained vectors have the configured length and are finite") {
  const auto c = two_topic_corpus(60);
  EmbeddingConfig cfg;
  cfg.epochs = 1;
  const auto t = train_embeddings(c, cfg);
  CHECK(t.dim() == 200);
  CHECK(t.rows() == c.vocabulary().size());
  CHECK(t.all_finite());
  for (double x : t.row(Vocabulary::kUnk)) CHECK(x == 0.0);
}

TEST_CASE("same seed gives identical tables, another seed does not") {
  const auto c = two_topic_corpus(80);
  EmbeddingConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 2;
  cfg.seed = 42;
  const auto a = train_embeddings(c, cfg);
  CHECK(train_embeddings(c, cfg) == a);
  cfg.seed = 43;
  CHECK_FALSE(train_embeddings(c, cfg) == a);
}

TEST_CASE("co-occurring tokens end up closer than tokens that never meet") {
  const auto c = two_topic_corpus();
  EmbeddingConfig cfg;
  cfg.dim = 24;
  cfg.epochs = 15;
  const auto t = train_embeddings(c, cfg);
  const auto& v = c.vocabulary();
  const double together = cosine(t.row(v.id("a")), t.row(v.id("b")));
  const double apart = cosine(t.row(v.id("a")), t.row(v.id("c")));
  CHECK(together > apart);
  CHECK(cosine(t.row(v.id("c")), t.row(v.id("d"))) > cosine(t.row(v.id("b")), t.row(v.id("d"))));
}

TEST_CASE("training rejects corpora too small for the window") {
  const auto c = build_corpus(std::vector<std::string>{"a b", "a b"});
  CHECK_THROWS_AS(train_embeddings(c, EmbeddingConfig{}), ValidationError);
}

TEST_CASE("table helpers") {
  auto t = testing::table_of({{3, 4}, {0, 0}});
  CHECK(dot(t.row(1), t.row(1)) == 25.0);
  t.normalize_rows();
  CHECK(t.row(1)[0] == doctest::Approx(0.6));
  CHECK(t.row(2)[0] == 0.0);
  t.scale(2.0);
  CHECK(t.row(1)[1] == doctest::Approx(1.6));
  CHECK(cosine(t.row(1), t.row(2)) == 0.0);
}
