#include <doctest.h>

#include <limits>
#include <set>

#include <aspectseed/error.hpp>
#include <aspectseed/pipeline.hpp>
#include <aspectseed/synthetic.hpp>
#include <aspectseed/table_io.hpp>

#include "support.hpp"

using namespace aspectseed;

namespace {

struct Fixture {
  SyntheticData data;
  RunConfig cfg;
  RunContext ctx;
};

// Small enough to run a few iterations in about a second.
Fixture small_fixture(std::uint64_t seed = 3) {
  Fixture f;
  SyntheticSpec spec;
  spec.k = 2;
  spec.segments_per_aspect = 60;
  spec.signature_size = 10;
  spec.background_size = 20;
  spec.seeds_per_aspect = 3;
  spec.seed = seed;
  f.data = generate_synthetic(spec);
  f.cfg.seed = seed;
  f.cfg.deterministic = true;
  f.cfg.write_iteration_artifacts = false;
  f.cfg.embedding.dim = 16;
  f.cfg.embedding.epochs = 20;
  f.cfg.classifier.filters = 6;
  f.cfg.max_iters = 3;
  std::vector<std::string> lines;
  for (const auto& s : f.data.train) lines.push_back(s.text);
  std::vector<GoldExample> gold;
  for (const auto& s : f.data.test) gold.push_back({s.label, s.text});
  f.ctx = make_context(build_corpus(lines), f.data.seeds, gold, f.cfg);
  return f;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("no_iter runs exactly one iteration without a seed update") {
  auto f = small_fixture();
  f.cfg.mode = Mode::no_iter;
  const auto r = run(f.ctx, f.data.seeds, f.cfg);
  CHECK(r.state.records.size() == 1);
  CHECK(r.state.history.size() == 1);
  CHECK(r.state.model->classes() == 3);
  CHECK(r.state.records[0].metrics.has_value());
}

TEST_CASE("an iteration cap of one reproduces no_iter output") {
  auto f = small_fixture();
  f.cfg.max_iters = 1;
  const auto capped = run(f.ctx, f.data.seeds, f.cfg);
  f.cfg.mode = Mode::no_iter;
  const auto single = run(f.ctx, f.data.seeds, f.cfg);
  CHECK(capped.state.records.size() == 1);
  CHECK(capped.predictions == single.predictions);
  CHECK(capped.test_predictions == single.test_predictions);
  CHECK(*capped.state.model == *single.state.model);
}

TEST_CASE("full run: history starts with the user seeds and stays disjoint") {
  auto f = small_fixture();
  const auto r = run(f.ctx, f.data.seeds, f.cfg);
  const auto& h = r.state.history;
  REQUIRE(!h.empty());
  CHECK(h[0].iteration == 0);
  CHECK(h[0].seeds == f.data.seeds.seeds);
  CHECK(r.state.records.size() <= f.cfg.max_iters);
  CHECK(h.size() == r.state.records.size() + 1);
  CHECK(r.state.model->classes() == f.data.aspects.size() + 1);
  CHECK(r.predictions.size() == f.ctx.corpus.size());
  for (const auto& p : r.predictions) CHECK(p.size() == 3);

  for (std::size_t i = 1; i < h.size(); ++i) {
    CHECK(h[i].iteration == i);
    CHECK(h[i].noisy_applied);
    std::set<std::string> seen;
    const auto noisy = as_set(h[i].noisy);
    for (const auto& list : h[i].seeds) {
      CHECK(!list.empty());
      CHECK(list.size() <= f.cfg.max_seeds);
      for (const auto& w : list) {
        CHECK(seen.insert(w).second);
        CHECK_FALSE(noisy.contains(w));
      }
    }
  }
  if (r.state.converged) {
    const auto& last = h.back();
    const auto& prev = h[h.size() - 2];
    for (std::size_t j = 0; j < last.seeds.size(); ++j) CHECK(as_set(last.seeds[j]) == as_set(prev.seeds[j]));
    CHECK(r.state.records.back().converged);
  }
}

TEST_CASE("deterministic runs are repeatable") {
  auto f = small_fixture();
  const auto a = run(f.ctx, f.data.seeds, f.cfg);
  const auto b = run(f.ctx, f.data.seeds, f.cfg);
  CHECK(a.predictions == b.predictions);
  CHECK(manifest_json(f.cfg, f.ctx, a) == manifest_json(f.cfg, f.ctx, b));
}

TEST_CASE("ablation modes change only their own stage") {
  auto f = small_fixture();
  f.cfg.max_iters = 1;
  const auto full = run(f.ctx, f.data.seeds, f.cfg);

  f.cfg.mode = Mode::no_filter;
  const auto nf = run(f.ctx, f.data.seeds, f.cfg);
  CHECK_FALSE(nf.state.history[1].noisy_applied);
  CHECK(nf.state.history[1].noisy == full.state.history[1].noisy);
  CHECK(nf.state.records[0].candidate_pool_size == full.state.records[0].candidate_pool_size);
  CHECK(nf.predictions == full.predictions);

  f.cfg.mode = Mode::no_tuning;
  const auto nt = run(f.ctx, f.data.seeds, f.cfg);
  std::set<TokenId> distinct;
  for (const auto& s : f.ctx.corpus.segments()) distinct.insert(s.tokens.begin(), s.tokens.end());
  CHECK(nt.state.records[0].candidate_pool_size == distinct.size());
  CHECK(nt.state.records[0].gamma == full.state.records[0].gamma);
  CHECK(nt.predictions == full.predictions);
}

TEST_CASE("loop terminates within the cap when seeds keep changing") {
  // Each aspect starts from the other aspect's words, so the first update
  // must rewrite both sets.
  auto f = small_fixture(5);
  SeedFile swapped = f.data.seeds;
  std::swap(swapped.seeds[0], swapped.seeds[1]);
  f.cfg.max_iters = 2;
  const auto r = run(f.ctx, swapped, f.cfg);
  CHECK(r.state.records.size() <= 2);
  CHECK(r.state.history.size() == r.state.records.size() + 1);
  CHECK_FALSE(r.state.records[0].converged);
}

TEST_CASE("a failing stage is reported by name") {
  auto f = small_fixture();
  f.ctx.table.row(1)[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    run(f.ctx, f.data.seeds, f.cfg);
    FAIL("expected StageError");
  } catch (const StageError& e) {
    CHECK(std::string(e.what()).find("stage '") != std::string::npos);
    CHECK_FALSE(e.stage().empty());
  }
}

TEST_CASE("run_from_files writes the documented outputs") {
  testing::TempDir dir("pipe");
  auto f = small_fixture();
  std::string corpus, test;
  for (const auto& s : f.data.train) corpus += s.text + "\n";
  for (const auto& s : f.data.test) test += s.label + "\t" + s.text + "\n";
  dir.write("corpus.txt", corpus);
  dir.write("test.tsv", test);
  dir.write("seeds.json", R"({"food": ["food00", "food01"], "service": ["service00", "service01"]})");
  dir.write("config.json", R"({
    "schema_version": 1, "corpus": "corpus.txt", "seeds": "seeds.json", "test": "test.tsv",
    "out_dir": "out", "dim": 12, "max_iters": 2, "seed": 4, "deterministic": true,
    "embedding": {"epochs": 10}, "classifier": {"filters": 4}
  })");
  const auto cfg = load_run_config(dir / "config.json");
  const auto r = run_from_files(cfg);
  const auto out = dir / "out";
  for (const char* name : {"manifest.json", "predictions.tsv", "test_predictions.tsv", "seed_history.json",
                           "model.json", "embeddings.txt", "iter_01/model_k.json", "iter_01/model_k1.json",
                           "iter_01/pseudo_labels.tsv", "iter_01/predictions_k1.tsv", "iter_01/misc_scores.csv"}) {
    INFO(name);
    CHECK(std::filesystem::exists(out / name));
  }
  const auto table = read_predictions(out / "predictions.tsv");
  CHECK(table.class_names == std::vector<std::string>{"food", "service", "misc"});
  CHECK(table.probs.size() == r.predictions.size());
  const auto ck = load_checkpoint(out / "model.json");
  CHECK(ck.model.classes() == 3);
  CHECK(ck.class_names.back() == "misc");
}

TEST_CASE("context construction validates gold labels") {
  auto f = small_fixture();
  std::vector<std::string> lines{"food00 bg00 bg01", "service00 bg00 bg02"};
  std::vector<GoldExample> gold{{"nonsense", "food00"}};
  CHECK_THROWS_AS(make_context(build_corpus(lines, {1}), f.data.seeds, gold, f.cfg), ValidationError);
}
