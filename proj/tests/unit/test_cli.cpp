#include <doctest.h>

#include <cstdlib>
#include <string>

#include <json.hpp>

#include <aspectseed/table_io.hpp>

#include "support.hpp"

using namespace aspectseed;

namespace {

struct Outcome {
  int status = -1;
  std::string out;
  std::string err;
};

Outcome cli(const testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      std::string("\"") + ASPECTSEED_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  Outcome o;
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  o.out = read_text_file(out);
  o.err = read_text_file(err);
  return o;
}

// A small benchmark plus flags that keep a run to a second or two.
const char* kFast = "--dim 16 --epochs 2 --max-iters 2 --deterministic";

void small_synth(const testing::TempDir& dir, const std::string& name) {
  const auto o = cli(dir, "synth --k 2 --segments-per-aspect 40 --seed 3 --out-dir \"" + (dir / name).string() + "\"");
  REQUIRE(o.status == 0);
}

}  // namespace

TEST_CASE("synth writes identical files for the same seed") {
  testing::TempDir dir("cli_synth");
  small_synth(dir, "a");
  small_synth(dir, "b");
  for (const char* f : {"corpus.txt", "train_gold.tsv", "test.tsv", "seeds.json", "config.json"}) {
    INFO(f);
    CHECK(read_text_file(dir / "a" / f) == read_text_file(dir / "b" / f));
  }
  const auto cfg = nlohmann::json::parse(read_text_file(dir / "a" / "config.json"));
  CHECK(cfg["seed"] == 3);
  CHECK(cfg["schema_version"] == 1);
}

TEST_CASE("run, eval, seeds and predict work end to end") {
  testing::TempDir dir("cli_run");
  small_synth(dir, "s");
  const auto s = dir / "s";
  const auto cfg = (s / "config.json").string();

  auto o = cli(dir, "run --config \"" + cfg + "\" --mode no_iter " + kFast);
  REQUIRE_MESSAGE(o.status == 0, o.err);
  CHECK(o.out.find("manifest.json") != std::string::npos);
  CHECK(o.err.find("iteration 1") != std::string::npos);

  const auto manifest = nlohmann::json::parse(read_text_file(s / "run" / "manifest.json"));
  CHECK(manifest["iterations"].size() == 1);
  CHECK(manifest["config"]["mode"]["value"] == "no_iter");
  CHECK(manifest["config"]["mode"]["source"] == "flag");
  CHECK(manifest["config"]["dim"]["source"] == "flag");
  CHECK(manifest["config"]["gamma_quantile"]["source"] == "default");
  CHECK(manifest["classes"].back() == "misc");

  o = cli(dir, "eval --pred \"" + (s / "run" / "test_predictions.tsv").string() + "\" --gold \"" +
                   (s / "test.tsv").string() + "\" --out-dir \"" + (dir / "ev").string() + "\"");
  REQUIRE_MESSAGE(o.status == 0, o.err);
  CHECK(o.out.find("food") != std::string::npos);
  CHECK(o.out.find("misc") != std::string::npos);
  CHECK(o.out.find("macro") != std::string::npos);
  const auto metrics = nlohmann::json::parse(read_text_file(dir / "ev" / "metrics.json"));
  CHECK(metrics["macro"]["f1"].get<double>() >= 0.0);
  CHECK(metrics.contains("macro_no_misc"));

  o = cli(dir, "seeds --history \"" + (s / "run" / "seed_history.json").string() + "\"");
  REQUIRE(o.status == 0);
  CHECK(o.out.find("iteration 0") != std::string::npos);
  CHECK(o.out.find("food:") != std::string::npos);

  o = cli(dir, "predict --model \"" + (s / "run" / "model.json").string() + "\" --embeddings \"" +
                   (s / "run" / "embeddings.txt").string() + "\" --corpus \"" + (s / "test.tsv").string() +
                   "\" --gold-input --out-dir \"" + (dir / "pr").string() + "\"");
  REQUIRE_MESSAGE(o.status == 0, o.err);
  CHECK(read_text_file(dir / "pr" / "predictions.tsv") == read_text_file(s / "run" / "test_predictions.tsv"));
}

TEST_CASE("deterministic runs write identical outputs") {
  testing::TempDir dir("cli_det");
  small_synth(dir, "s");
  const auto cfg = (dir / "s" / "config.json").string();
  const std::string args = "run --config \"" + cfg + "\" " + kFast;
  REQUIRE(cli(dir, args + " --out-dir \"" + (dir / "r1").string() + "\"").status == 0);
  REQUIRE(cli(dir, args + " --out-dir \"" + (dir / "r2").string() + "\"").status == 0);
  for (const char* f : {"predictions.tsv", "test_predictions.tsv", "seed_history.json", "model.json"}) {
    INFO(f);
    CHECK(read_text_file(dir / "r1" / f) == read_text_file(dir / "r2" / f));
  }
}

TEST_CASE("errors are reported on stderr with a kind and a nonzero status") {
  testing::TempDir dir("cli_err");
  dir.write("bad.json", R"({"schema_version": 1, "colour": "blue"})");
  auto o = cli(dir, "run --config \"" + (dir / "bad.json").string() + "\"");
  CHECK(o.status != 0);
  CHECK(o.err.rfind("error\tvalidation\t", 0) == 0);

  dir.write("nocorpus.json", R"({"corpus": "missing.txt", "seeds": "s.json"})");
  o = cli(dir, "run --config \"" + (dir / "nocorpus.json").string() + "\"");
  CHECK(o.status != 0);
  CHECK(o.err.rfind("error\tio\t", 0) == 0);

  o = cli(dir, "frobnicate");
  CHECK(o.status == 2);
  CHECK(o.err.rfind("error\tusage\t", 0) == 0);

  dir.write("pred.tsv", "id\tlabel\tp_food\tp_misc\n0\tfood\t0.9\t0.1\n");
  dir.write("gold.tsv", "food\ta\nmisc\tb\n");
  o = cli(dir, "eval --pred \"" + (dir / "pred.tsv").string() + "\" --gold \"" + (dir / "gold.tsv").string() + "\"");
  CHECK(o.status != 0);
  CHECK(o.err.rfind("error\t", 0) == 0);
}
