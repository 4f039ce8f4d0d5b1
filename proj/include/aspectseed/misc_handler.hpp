#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "aspectseed/pseudo_label.hpp"

namespace aspectseed {

inline constexpr double kDefaultGammaQuantile = 0.75;

// -(1/ln K) sum_j p_j ln p_j, with 0 ln 0 = 0. Throws ValidationError if K < 2.
double normalized_entropy(std::span<const double> p);

// Empirical quantile with linear interpolation between the closest order
// statistics: position q*(n-1) in the sorted sample.
double estimate_gamma(std::span<const double> h_values, double quantile = kDefaultGammaQuantile);

// 0 below gamma, (h - gamma) / (1 - gamma) from gamma up. Throws ValidationError for gamma >= 1.
double misc_probability(double h, double gamma);

// ((1 - m) p_1, ..., (1 - m) p_K, m).
Distribution augment_labels(std::span<const double> p, double p_misc);

struct MiscScores {
  double gamma = 0.0;
  std::vector<double> h_norm;
  std::vector<double> p_misc;
};

// h_norm for every prediction, gamma from their quantile, then p_misc.
MiscScores score_misc(std::span<const Distribution> k_predictions, double quantile = kDefaultGammaQuantile);

// K+1 targets for every segment from K-aspect predictions and their misc scores.
std::vector<Distribution> augment_all(std::span<const Distribution> k_predictions, const MiscScores& scores);

// CSV "segment,h_norm,p_misc" for histogram plotting.
void write_misc_scores(const std::filesystem::path& path, const MiscScores& scores);

}  // namespace aspectseed
