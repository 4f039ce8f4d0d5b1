#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "aspectseed/corpus.hpp"
#include "aspectseed/embeddings.hpp"
#include "aspectseed/pseudo_label.hpp"

namespace aspectseed {

// Rows are gold classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0);
  ConfusionMatrix(std::span<const std::size_t> gold, std::span<const std::size_t> predicted, std::size_t classes);

  std::size_t classes() const { return n_; }
  std::size_t& at(std::size_t gold, std::size_t pred) { return counts_.at(gold * n_ + pred); }
  std::size_t at(std::size_t gold, std::size_t pred) const { return counts_.at(gold * n_ + pred); }
  std::size_t total() const;
  void add(std::size_t gold, std::size_t pred) { ++at(gold, pred); }

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  bool included = false;      // part of the macro average
};

struct MetricReport {
  std::vector<ClassScores> per_class;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Plain (unweighted) macro average over classes that have gold or predicted
// segments. Zero denominators give 0. `classes` restricts the average to a
// subset (e.g. without misc); empty means all. Throws ValidationError on an
// empty matrix.
MetricReport macro_metrics(const ConfusionMatrix& cm, std::span<const std::size_t> classes = {});

// Aligned plain-text table.
std::string format_report(const MetricReport& report, std::span<const std::string> class_names);

struct CosSimOptions {
  double gamma_quantile = 0.75;
};

// Cosine between each segment's mean token vector and each aspect's mean seed
// vector; argmax over K, with misc (index K) decided by the entropy rule on
// softmax(cosines). Empty or zero-norm segments are misc.
std::vector<std::size_t> cossim_baseline(const Corpus& corpus, const SeedSets& seeds, const EmbeddingTable& table,
                                         const CosSimOptions& options = {});

struct GoldExample {
  std::string label;
  std::string text;
};

// TSV "label<TAB>text" per line.
std::vector<GoldExample> load_gold(const std::filesystem::path& path);

// Maps label names to indices over aspects + "misc". Unknown labels throw ValidationError.
std::vector<std::size_t> label_indices(std::span<const GoldExample> gold, std::span<const std::string> class_names);

}  // namespace aspectseed
