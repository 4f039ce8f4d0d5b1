#include "aspectseed/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "aspectseed/error.hpp"
#include "aspectseed/table_io.hpp"

namespace aspectseed {

void SeedSets::validate(const Vocabulary& vocab) const {
  if (aspects.size() < 2) throw ValidationError("need at least 2 aspects, got " + std::to_string(aspects.size()));
  if (seeds.size() != aspects.size()) throw ValidationError("seed lists do not match aspect count");
  std::unordered_set<TokenId> seen;
  for (std::size_t j = 0; j < seeds.size(); ++j) {
    if (seeds[j].empty()) throw ValidationError("aspect '" + aspects[j] + "' has no seed words");
    for (TokenId t : seeds[j]) {
      if (t == Vocabulary::kUnk || t >= vocab.size()) {
        throw ValidationError("aspect '" + aspects[j] + "' has a seed outside the vocabulary");
      }
      if (!seen.insert(t).second) {
        throw ValidationError("seed '" + vocab.token(t) + "' appears more than once");
      }
    }
  }
}

SeedFile parse_seed_json(const std::string& text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("seed file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("seed file must be a JSON object of aspect -> [seeds]");

  SeedFile file;
  std::set<std::string> seen;
  for (const auto& [name, list] : doc.items()) {
    if (name == "misc") throw ValidationError("'misc' is reserved and cannot be a seeded aspect");
    if (!list.is_array()) throw ValidationError("seeds of aspect '" + name + "' must be an array");
    std::vector<std::string> words;
    for (const auto& item : list) {
      if (!item.is_string()) throw ValidationError("seeds of aspect '" + name + "' must be strings");
      auto toks = tokenize(item.get<std::string>());
      if (toks.size() != 1) {
        throw ValidationError("seed '" + item.get<std::string>() + "' is not a single token");
      }
      if (!seen.insert(toks[0]).second) throw ValidationError("duplicate seed '" + toks[0] + "'");
      words.push_back(toks[0]);
    }
    file.aspects.push_back(name);
    file.seeds.push_back(std::move(words));
  }
  if (file.aspects.size() < 2) throw ValidationError("seed file needs at least 2 aspects");
  return file;
}

SeedFile load_seed_file(const std::filesystem::path& path) { return parse_seed_json(read_text_file(path)); }

SeedSets resolve_seeds(const SeedFile& file, const Vocabulary& vocab, std::vector<std::string>* dropped) {
  SeedSets out;
  out.aspects = file.aspects;
  for (std::size_t j = 0; j < file.aspects.size(); ++j) {
    std::vector<TokenId> ids;
    for (const auto& w : file.seeds[j]) {
      TokenId id = vocab.id(w);
      if (id == Vocabulary::kUnk) {
        if (dropped) dropped->push_back(w);
        continue;
      }
      ids.push_back(id);
    }
    out.seeds.push_back(std::move(ids));
  }
  out.validate(vocab);
  return out;
}

std::vector<double> aspect_embedding(std::span<const TokenId> seeds, const EmbeddingTable& table) {
  if (seeds.empty()) throw ValidationError("aspect embedding needs at least one seed");
  std::vector<double> mean(table.dim(), 0.0);
  for (TokenId t : seeds) {
    auto v = table.row(t);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += v[k];
  }
  const double n = static_cast<double>(seeds.size());
  for (double& x : mean) x /= n;
  return mean;
}

AspectEmbeddings aspect_embeddings(const SeedSets& seeds, const EmbeddingTable& table) {
  AspectEmbeddings out;
  out.reserve(seeds.k());
  for (const auto& list : seeds.seeds) out.push_back(aspect_embedding(list, table));
  return out;
}

double attention_weight(std::span<const double> token_vector, const AspectEmbeddings& aspects) {
  double best = -INFINITY;
  for (const auto& a : aspects) best = std::max(best, dot(a, token_vector));
  return std::max(best, 0.0);
}

std::vector<double> segment_representation(std::span<const TokenId> tokens, const AspectEmbeddings& aspects,
                                           const EmbeddingTable& table) {
  if (tokens.empty()) throw ValidationError("segment representation of an empty segment");
  const std::size_t d = table.dim();
  std::vector<double> weighted(d, 0.0);
  std::vector<double> plain(d, 0.0);
  double total = 0.0;
  for (TokenId t : tokens) {
    auto e = table.row(t);
    const double beta = attention_weight(e, aspects);
    total += beta;
    for (std::size_t k = 0; k < d; ++k) {
      weighted[k] += beta * e[k];
      plain[k] += e[k];
    }
  }
  if (total > 0.0) {
    for (double& x : weighted) x /= total;
    return weighted;
  }
  for (double& x : plain) x /= static_cast<double>(tokens.size());
  return plain;
}

Distribution softmax(std::span<const double> logits) {
  Distribution p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& x : p) {
    x = std::exp(x - m);
    sum += x;
  }
  for (double& x : p) x /= sum;
  return p;
}

Distribution pseudo_labels(std::span<const double> z, const AspectEmbeddings& aspects) {
  std::vector<double> logits;
  logits.reserve(aspects.size());
  for (const auto& a : aspects) logits.push_back(dot(a, z));
  return softmax(logits);
}

namespace {

Distribution label_segment(const TextSegment& seg, const AspectEmbeddings& aspects, const EmbeddingTable& table) {
  if (seg.empty()) return Distribution(aspects.size(), 1.0 / static_cast<double>(aspects.size()));
  const auto z = segment_representation(seg.tokens, aspects, table);
  return pseudo_labels(z, aspects);
}

}  // namespace

std::vector<Distribution> generate_all(const Corpus& corpus, const SeedSets& seeds, const EmbeddingTable& table,
                                       const ExecPolicy& policy) {
  if (!policy.parallel()) return generate_all_serial(corpus, seeds, table);
  seeds.validate(corpus.vocabulary());
  const auto aspects = aspect_embeddings(seeds, table);
  const auto& segs = corpus.segments();
  std::vector<Distribution> out(segs.size());
#pragma omp parallel for schedule(static) num_threads(policy.resolved_threads())
  for (std::size_t i = 0; i < segs.size(); ++i) out[i] = label_segment(segs[i], aspects, table);
  return out;
}

std::vector<Distribution> generate_all_serial(const Corpus& corpus, const SeedSets& seeds,
                                              const EmbeddingTable& table) {
  seeds.validate(corpus.vocabulary());
  const auto aspects = aspect_embeddings(seeds, table);
  std::vector<Distribution> out;
  out.reserve(corpus.size());
  for (const auto& seg : corpus.segments()) out.push_back(label_segment(seg, aspects, table));
  return out;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace aspectseed
