#include "aspectseed/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aspectseed/error.hpp"
#include "aspectseed/misc_handler.hpp"

namespace aspectseed {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {}

ConfusionMatrix::ConfusionMatrix(std::span<const std::size_t> gold, std::span<const std::size_t> predicted,
                                 std::size_t classes)
    : ConfusionMatrix(classes) {
  if (gold.size() != predicted.size()) throw ValidationError("gold and predicted label counts differ");
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= classes || predicted[i] >= classes) throw ValidationError("label index out of range");
    add(gold[i], predicted[i]);
  }
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

MetricReport macro_metrics(const ConfusionMatrix& cm, std::span<const std::size_t> classes) {
  const std::size_t n = cm.classes();
  if (n == 0 || cm.total() == 0) throw ValidationError("cannot score an empty confusion matrix");
  MetricReport report;
  report.per_class.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < n; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const double tp = static_cast<double>(cm.at(c, c));
    auto& s = report.per_class[c];
    s.support = row;
    s.predicted = col;
    s.precision = col == 0 ? 0.0 : tp / static_cast<double>(col);
    s.recall = row == 0 ? 0.0 : tp / static_cast<double>(row);
    s.f1 = (s.precision + s.recall) == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    s.included = row > 0 || col > 0;
  }

  std::vector<std::size_t> subset(classes.begin(), classes.end());
  if (subset.empty()) {
    subset.resize(n);
    std::iota(subset.begin(), subset.end(), std::size_t{0});
  }
  std::size_t used = 0;
  for (std::size_t c : subset) {
    if (c >= n) throw ValidationError("class subset index out of range");
    if (!report.per_class[c].included) continue;
    report.precision += report.per_class[c].precision;
    report.recall += report.per_class[c].recall;
    report.f1 += report.per_class[c].f1;
    ++used;
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (std::find(subset.begin(), subset.end(), c) == subset.end()) report.per_class[c].included = false;
  }
  if (used > 0) {
    report.precision /= static_cast<double>(used);
    report.recall /= static_cast<double>(used);
    report.f1 /= static_cast<double>(used);
  }
  return report;
}

std::string format_report(const MetricReport& report, std::span<const std::string> class_names) {
  std::size_t width = 5;
  for (const auto& name : class_names) width = std::max(width, name.size());
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %7s\n", static_cast<int>(width), "class", "precision", "recall",
                "f1", "support");
  os << buf;
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& s = report.per_class[c];
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    std::snprintf(buf, sizeof buf, "%-*s  %9.4f  %9.4f  %9.4f  %7zu\n", static_cast<int>(width), name.c_str(),
                  s.precision, s.recall, s.f1, s.support);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-*s  %9.4f  %9.4f  %9.4f\n", static_cast<int>(width), "macro", report.precision,
                report.recall, report.f1);
  os << buf;
  return os.str();
}

std::vector<std::size_t> cossim_baseline(const Corpus& corpus, const SeedSets& seeds, const EmbeddingTable& table,
                                         const CosSimOptions& options) {
  seeds.validate(corpus.vocabulary());
  const std::size_t k = seeds.k();
  const auto centroids = aspect_embeddings(seeds, table);
  const std::size_t misc = k;

  std::vector<std::size_t> labels(corpus.size(), misc);
  std::vector<Distribution> scored;
  std::vector<std::size_t> scored_ids;
  std::vector<double> mean(table.dim());
  for (const auto& seg : corpus.segments()) {
    if (seg.empty()) continue;
    std::fill(mean.begin(), mean.end(), 0.0);
    for (TokenId t : seg.tokens) {
      auto v = table.row(t);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += v[i];
    }
    if (dot(mean, mean) == 0.0) continue;
    std::vector<double> cos(k);
    for (std::size_t j = 0; j < k; ++j) cos[j] = cosine(mean, centroids[j]);
    scored.push_back(softmax(cos));
    scored_ids.push_back(seg.id);
  }
  if (scored.empty()) return labels;

  const auto misc_scores = score_misc(scored, options.gamma_quantile);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    labels[scored_ids[i]] = argmax(augment_labels(scored[i], misc_scores.p_misc[i]));
  }
  return labels;
}

std::vector<GoldExample> load_gold(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<GoldExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), lineno, "expected 'label<TAB>text'");
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

std::vector<std::size_t> label_indices(std::span<const GoldExample> gold, std::span<const std::string> class_names) {
  std::vector<std::size_t> out;
  out.reserve(gold.size());
  for (const auto& g : gold) {
    auto it = std::find(class_names.begin(), class_names.end(), g.label);
    if (it == class_names.end()) throw ValidationError("unknown gold label '" + g.label + "'");
    out.push_back(static_cast<std::size_t>(it - class_names.begin()));
  }
  return out;
}

}  // namespace aspectseed
