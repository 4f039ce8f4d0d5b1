#include "aspectseed/misc_handler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aspectseed/error.hpp"
#include "aspectseed/table_io.hpp"

namespace aspectseed {

double normalized_entropy(std::span<const double> p) {
  if (p.size() < 2) throw ValidationError("normalized entropy needs K >= 2");
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  const double out = h / std::log(static_cast<double>(p.size()));
  return std::clamp(out, 0.0, 1.0);
}

double estimate_gamma(std::span<const double> h_values, double quantile) {
  if (h_values.empty()) throw ValidationError("cannot estimate gamma from an empty sample");
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw ValidationError("quantile must be in [0, 1]");
  std::vector<double> sorted(h_values.begin(), h_values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = quantile * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double misc_probability(double h, double gamma) {
  if (!(gamma < 1.0)) throw ValidationError("gamma must be below 1");
  if (h < gamma) return 0.0;
  return (h - gamma) / (1.0 - gamma);
}

Distribution augment_labels(std::span<const double> p, double p_misc) {
  Distribution out;
  out.reserve(p.size() + 1);
  for (double v : p) out.push_back((1.0 - p_misc) * v);
  out.push_back(p_misc);
  return out;
}

MiscScores score_misc(std::span<const Distribution> k_predictions, double quantile) {
  MiscScores s;
  s.h_norm.reserve(k_predictions.size());
  for (const auto& p : k_predictions) s.h_norm.push_back(normalized_entropy(p));
  s.gamma = estimate_gamma(s.h_norm, quantile);
  // Every segment can share the maximal entropy; keep the denominator defined.
  if (s.gamma >= 1.0) s.gamma = std::nextafter(1.0, 0.0);
  s.p_misc.reserve(s.h_norm.size());
  for (double h : s.h_norm) s.p_misc.push_back(misc_probability(h, s.gamma));
  return s;
}

std::vector<Distribution> augment_all(std::span<const Distribution> k_predictions, const MiscScores& scores) {
  if (scores.p_misc.size() != k_predictions.size()) throw ValidationError("misc scores do not match predictions");
  std::vector<Distribution> out;
  out.reserve(k_predictions.size());
  for (std::size_t i = 0; i < k_predictions.size(); ++i) out.push_back(augment_labels(k_predictions[i], scores.p_misc[i]));
  return out;
}

void write_misc_scores(const std::filesystem::path& path, const MiscScores& scores) {
  std::ostringstream os;
  os.precision(17);
  os << "segment,h_norm,p_misc\n";
  for (std::size_t i = 0; i < scores.h_norm.size(); ++i) {
    os << i << ',' << scores.h_norm[i] << ',' << scores.p_misc[i] << '\n';
  }
  write_text_file(path, os.str());
}

}  // namespace aspectseed
