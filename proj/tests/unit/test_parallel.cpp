#include <doctest.h>

#include <cmath>

#include <aspectseed/classifier.hpp>
#include <aspectseed/embeddings.hpp>
#include <aspectseed/pseudo_label.hpp>
#include <aspectseed/seed_update.hpp>
#include <aspectseed/synthetic.hpp>

using namespace aspectseed;

namespace {

// The container may expose a single core, so thread counts are forced.
const ExecPolicy kFour{4, false};

struct World {
  SyntheticData data;
  Corpus corpus;
  EmbeddingTable table;
  SeedSets seeds;
};

const World& world() {
  static const World w = [] {
    World w;
    SyntheticSpec spec;
    spec.segments_per_aspect = 80;
    w.data = generate_synthetic(spec);
    std::vector<std::string> lines;
    for (const auto& s : w.data.train) lines.push_back(s.text);
    w.corpus = build_corpus(lines);
    EmbeddingConfig ec;
    ec.dim = 16;
    ec.epochs = 5;
    w.table = train_embeddings(w.corpus, ec);
    w.seeds = resolve_seeds(w.data.seeds, w.corpus.vocabulary());
    return w;
  }();
  return w;
}

ClassifierModel model_for(const World& w, std::size_t classes) {
  return ClassifierModel::initialized(w.table.dim(), 6, classes, 0.5, 11);
}

}  // namespace

TEST_CASE("policy resolution") {
  CHECK_FALSE(ExecPolicy::serial().parallel());
  CHECK_FALSE(ExecPolicy(4, true).parallel());
  CHECK(ExecPolicy(4, true).resolved_threads() == 1);
#ifdef _OPENMP
  CHECK(kFour.parallel());
  CHECK(kFour.resolved_threads() == 4);
#endif
}

TEST_CASE("pseudo labels agree with the serial reference") {
  const auto& w = world();
  CHECK(generate_all(w.corpus, w.seeds, w.table, kFour) == generate_all_serial(w.corpus, w.seeds, w.table));
}

TEST_CASE("prediction agrees with the serial reference") {
  const auto& w = world();
  const auto m = model_for(w, 4);
  CHECK(predict(m, w.corpus, w.table, kFour) == predict_serial(m, w.corpus, w.table));
}

TEST_CASE("candidate pool agrees with the serial reference") {
  const auto& w = world();
  const auto m = model_for(w, 3);
  for (double threshold : {0.0, 0.01, 0.05}) {
    ProbeOptions o;
    o.threshold = threshold;
    const auto a = candidate_pool(m, w.corpus, w.table, o, kFour);
    const auto b = candidate_pool_serial(m, w.corpus, w.table, o);
    CHECK(a.tokens == b.tokens);
    CHECK(a.max_shift == b.max_shift);
  }
}

TEST_CASE("parallel training matches serial up to summation order") {
  const auto& w = world();
  const auto targets = generate_all_serial(w.corpus, w.seeds, w.table);
  TrainConfig cfg;
  cfg.filters = 6;
  cfg.epochs = 2;
  cfg.seed = 5;
  auto serial = ClassifierModel::initialized(w.table.dim(), 6, 3, cfg.dropout, 3);
  auto parallel = serial;
  const auto rs = train(serial, w.corpus, w.table, targets, cfg, ExecPolicy::serial());
  const auto rp = train(parallel, w.corpus, w.table, targets, cfg, kFour);
  REQUIRE(rs.epoch_loss.size() == rp.epoch_loss.size());
  for (std::size_t e = 0; e < rs.epoch_loss.size(); ++e)
    CHECK(rp.epoch_loss[e] == doctest::Approx(rs.epoch_loss[e]).epsilon(1e-9));
  const auto ps = serial.parameters();
  const auto pp = parallel.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) worst = std::max(worst, std::abs(ps[i] - pp[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("parallel embedding training keeps its shape and stays finite") {
  const auto& w = world();
  EmbeddingConfig ec;
  ec.dim = 16;
  ec.epochs = 3;
  const auto t = train_embeddings(w.corpus, ec, kFour);
  CHECK(t.rows() == w.corpus.vocabulary().size());
  CHECK(t.dim() == 16);
  for (TokenId id = 0; id < t.rows(); ++id)
    for (double x : t.row(id)) CHECK(std::isfinite(x));
  for (double x : t.row(Vocabulary::kUnk)) CHECK(x == 0.0);
}
