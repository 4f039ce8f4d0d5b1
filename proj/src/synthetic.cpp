#include "aspectseed/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "aspectseed/corpus.hpp"
#include "aspectseed/error.hpp"
#include "aspectseed/rng.hpp"

namespace aspectseed {
namespace {

const char* const kAspectNames[] = {"food", "service", "price", "ambience", "drinks", "location", "staff", "menu"};

std::string numbered(const std::string& stem, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return stem + buf;
}

// Zipf-weighted sampler over a word list.
class WordSampler {
 public:
  WordSampler(std::vector<std::string> words, double exponent) : words_(std::move(words)) {
    double acc = 0.0;
    for (std::size_t r = 0; r < words_.size(); ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf_.push_back(acc);
    }
  }

  const std::string& draw(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return words_[static_cast<std::size_t>(it - cdf_.begin())];
  }

  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::vector<double> cdf_;
};

std::string join(std::vector<std::string> words, Rng& rng) {
  rng.shuffle(words.begin(), words.end());
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (k < 2) throw ValidationError("synthetic benchmark needs k >= 2");
  if (segments_per_aspect == 0) throw ValidationError("segments_per_aspect must be positive");
  if (!(misc_fraction >= 0.0 && misc_fraction < 1.0)) throw ValidationError("misc_fraction must be in [0, 1)");
  if (signature_size < seeds_per_aspect) {
    throw ValidationError("signature size " + std::to_string(signature_size) + " is smaller than the seed count " +
                          std::to_string(seeds_per_aspect));
  }
  if (seeds_per_aspect == 0) throw ValidationError("seeds_per_aspect must be positive");
  if (background_size == 0) throw ValidationError("background_size must be positive");
  if (min_signature_words == 0 || min_signature_words > max_signature_words) {
    throw ValidationError("need 0 < min_signature_words <= max_signature_words");
  }
  if (min_length > max_length || min_length < max_signature_words + 1) {
    throw ValidationError("need max_signature_words < min_length <= max_length");
  }
  if (!(cross_talk >= 0.0 && cross_talk <= 1.0)) throw ValidationError("cross_talk must be in [0, 1]");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must be in [0, 1)");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x5717ULL));
  SyntheticData data;

  std::vector<WordSampler> signatures;
  for (std::size_t j = 0; j < spec.k; ++j) {
    std::string name = j < std::size(kAspectNames) ? kAspectNames[j] : "aspect" + std::to_string(j + 1);
    std::vector<std::string> words;
    for (std::size_t i = 0; i < spec.signature_size; ++i) words.push_back(numbered(name, i));
    data.aspects.push_back(name);
    data.signatures.push_back(words);
    signatures.emplace_back(std::move(words), 0.7);
  }
  std::vector<WordSampler> out_of_scope;
  for (std::size_t o = 0; o < spec.out_of_scope_aspects; ++o) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < spec.signature_size; ++i) words.push_back(numbered("other" + std::to_string(o + 1) + "w", i));
    out_of_scope.emplace_back(std::move(words), 0.7);
  }
  std::vector<std::string> bg_words;
  for (std::size_t i = 0; i < spec.background_size; ++i) bg_words.push_back(numbered("bg", i));
  const WordSampler background(std::move(bg_words), 1.0);

  auto length = [&] { return spec.min_length + rng.below(spec.max_length - spec.min_length + 1); };
  auto signature_count = [&] {
    return spec.min_signature_words + rng.below(spec.max_signature_words - spec.min_signature_words + 1);
  };

  std::vector<SyntheticSegment> all;
  for (std::size_t j = 0; j < spec.k; ++j) {
    for (std::size_t s = 0; s < spec.segments_per_aspect; ++s) {
      const std::size_t len = length();
      const std::size_t sig = signature_count();
      std::vector<std::string> words;
      for (std::size_t i = 0; i < sig; ++i) words.push_back(signatures[j].draw(rng));
      if (rng.uniform() < spec.cross_talk) {
        std::size_t other = (j + 1 + rng.below(spec.k - 1)) % spec.k;
        words.push_back(signatures[other].draw(rng));
      }
      while (words.size() < len) words.push_back(background.draw(rng));
      all.push_back({join(std::move(words), rng), data.aspects[j]});
    }
  }

  const auto aspect_total = static_cast<double>(spec.k * spec.segments_per_aspect);
  const auto n_misc = static_cast<std::size_t>(std::llround(aspect_total * spec.misc_fraction / (1.0 - spec.misc_fraction)));
  for (std::size_t s = 0; s < n_misc; ++s) {
    const std::size_t len = length();
    std::vector<std::string> words;
    if (!out_of_scope.empty() && s % 2 == 1) {
      const auto& oos = out_of_scope[rng.below(out_of_scope.size())];
      const std::size_t sig = signature_count();
      for (std::size_t i = 0; i < sig; ++i) words.push_back(oos.draw(rng));
    }
    while (words.size() < len) words.push_back(background.draw(rng));
    all.push_back({join(std::move(words), rng), "misc"});
  }

  rng.shuffle(all.begin(), all.end());
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(all.size()) * spec.test_fraction));
  data.test.assign(all.end() - static_cast<std::ptrdiff_t>(n_test), all.end());
  all.resize(all.size() - n_test);
  data.train = std::move(all);

  data.seeds.aspects = data.aspects;
  for (std::size_t j = 0; j < spec.k; ++j) {
    std::vector<std::string> pool = data.signatures[j];
    rng.shuffle(pool.begin(), pool.end());
    pool.resize(spec.seeds_per_aspect);
    data.seeds.seeds.push_back(std::move(pool));
  }
  return data;
}

std::string signature_oracle(const SyntheticData& data, const std::string& text) {
  std::vector<std::size_t> hits(data.aspects.size(), 0);
  for (const auto& tok : tokenize(text)) {
    for (std::size_t j = 0; j < data.signatures.size(); ++j) {
      if (std::find(data.signatures[j].begin(), data.signatures[j].end(), tok) != data.signatures[j].end()) ++hits[j];
    }
  }
  const auto best = std::max_element(hits.begin(), hits.end());
  if (*best == 0) return "misc";
  return data.aspects[static_cast<std::size_t>(best - hits.begin())];
}

}  // namespace aspectseed
