#include "aspectseed/seed_update.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "aspectseed/error.hpp"

namespace aspectseed {

AspectFrequencyTable::AspectFrequencyTable(std::size_t classes, std::size_t vocab_size)
    : vocab_size_(vocab_size), aspect_(classes, 0), word_(classes * vocab_size, 0) {
  if (classes < 2) throw ValidationError("frequency table needs at least 2 classes");
}

void AspectFrequencyTable::add_segment(std::size_t cls, std::span<const TokenId> tokens) {
  if (cls >= classes()) throw ValidationError("class index out of range");
  ++aspect_[cls];
  std::vector<TokenId> distinct(tokens.begin(), tokens.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  for (TokenId w : distinct) ++word_.at(cls * vocab_size_ + w);
}

AspectFrequencyTable aspect_frequencies(std::span<const std::size_t> predicted, const Corpus& corpus,
                                        std::size_t classes) {
  if (predicted.size() != corpus.size()) throw ValidationError("need one predicted label per segment");
  AspectFrequencyTable table(classes, corpus.vocabulary().size());
  for (const auto& seg : corpus.segments()) {
    if (seg.empty()) continue;
    table.add_segment(predicted[seg.id], seg.tokens);
  }
  return table;
}

bool CandidatePool::contains(TokenId w) const { return std::binary_search(tokens.begin(), tokens.end(), w); }

namespace {

std::vector<std::size_t> probe_segments(const Corpus& corpus, std::size_t max_segments) {
  std::vector<std::size_t> ids;
  for (const auto& s : corpus.segments()) {
    if (!s.empty()) ids.push_back(s.id);
  }
  if (max_segments == 0 || max_segments >= ids.size()) return ids;
  std::vector<std::size_t> picked;
  picked.reserve(max_segments);
  for (std::size_t i = 0; i < max_segments; ++i) picked.push_back(ids[i * ids.size() / max_segments]);
  return picked;
}

// Largest KL shift seen per token when it is blanked out of one segment.
void probe_segment(const ClassifierModel& model, const TextSegment& seg, const EmbeddingTable& table,
                   std::vector<double>& max_shift) {
  const auto matrix = build_matrix(seg.tokens, table);
  const auto original = forward(model, matrix);
  std::vector<TokenId> distinct(seg.tokens.begin(), seg.tokens.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  SegmentMatrix ablated = matrix;
  for (TokenId w : distinct) {
    ablated.data = matrix.data;
    for (std::size_t t = 0; t < seg.tokens.size(); ++t) {
      if (seg.tokens[t] == w) std::fill(ablated.column(t).begin(), ablated.column(t).end(), 0.0);
    }
    const double shift = kl_loss(original, forward(model, ablated));
    max_shift[w] = std::max(max_shift[w], shift);
  }
}

CandidatePool collect(const std::vector<double>& max_shift, double threshold) {
  CandidatePool pool;
  for (TokenId w = 1; w < max_shift.size(); ++w) {
    if (max_shift[w] > threshold) {
      pool.tokens.push_back(w);
      pool.max_shift.push_back(max_shift[w]);
    }
  }
  return pool;
}

}  // namespace

CandidatePool candidate_pool_serial(const ClassifierModel& model, const Corpus& corpus, const EmbeddingTable& table,
                                    const ProbeOptions& options) {
  std::vector<double> max_shift(corpus.vocabulary().size(), 0.0);
  for (std::size_t id : probe_segments(corpus, options.max_segments)) {
    probe_segment(model, corpus.segment(id), table, max_shift);
  }
  return collect(max_shift, options.threshold);
}

CandidatePool candidate_pool(const ClassifierModel& model, const Corpus& corpus, const EmbeddingTable& table,
                             const ProbeOptions& options, const ExecPolicy& policy) {
  if (!policy.parallel()) return candidate_pool_serial(model, corpus, table, options);
  const auto ids = probe_segments(corpus, options.max_segments);
  const std::size_t v = corpus.vocabulary().size();
  const int threads = policy.resolved_threads();
  std::vector<std::vector<double>> local(static_cast<std::size_t>(threads), std::vector<double>(v, 0.0));
  std::exception_ptr error;
#pragma omp parallel num_threads(threads)
  {
    auto& shift = local[static_cast<std::size_t>(thread_index())];
#pragma omp for schedule(dynamic, 4)
    for (std::size_t i = 0; i < ids.size(); ++i) {
      try {
        probe_segment(model, corpus.segment(ids[i]), table, shift);
      } catch (...) {
#pragma omp critical(aspectseed_probe_error)
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
  std::vector<double> max_shift(v, 0.0);
  for (const auto& l : local) {
    for (std::size_t w = 0; w < v; ++w) max_shift[w] = std::max(max_shift[w], l[w]);
  }
  return collect(max_shift, options.threshold);
}

CandidatePool all_tokens_pool(const Corpus& corpus) {
  std::vector<bool> seen(corpus.vocabulary().size(), false);
  for (const auto& s : corpus.segments()) {
    for (TokenId t : s.tokens) seen[t] = true;
  }
  CandidatePool pool;
  for (TokenId w = 1; w < seen.size(); ++w) {
    if (seen[w]) {
      pool.tokens.push_back(w);
      pool.max_shift.push_back(0.0);
    }
  }
  return pool;
}

double indicative(const AspectFrequencyTable& table, std::size_t aspect, TokenId w) {
  const std::size_t total = table.aspect_count(aspect);
  if (total == 0) return 0.0;
  return static_cast<double>(table.word_count(aspect, w)) / static_cast<double>(total);
}

double distinctive(const AspectFrequencyTable& table, std::size_t aspect, TokenId w,
                   const DistinctiveOptions& options) {
  const std::size_t misc = table.classes() - 1;
  std::size_t other = 0;
  for (std::size_t k = 0; k < table.classes(); ++k) {
    if (k == aspect) continue;
    if (k == misc && (aspect == misc || !options.include_misc)) continue;
    other = std::max(other, table.word_count(k, w));
  }
  return static_cast<double>(table.word_count(aspect, w)) / static_cast<double>(std::max<std::size_t>(1, other));
}

std::vector<ScoredCandidate> rank_candidates(const AspectFrequencyTable& table, const CandidatePool& pool,
                                             std::size_t aspect, std::size_t max_seeds, const Vocabulary& vocab,
                                             const DistinctiveOptions& options) {
  std::vector<ScoredCandidate> out;
  for (TokenId w : pool.tokens) {
    ScoredCandidate c;
    c.token = w;
    c.count = table.word_count(aspect, w);
    c.indicative = indicative(table, aspect, w);
    c.distinctive = distinctive(table, aspect, w, options);
    if (c.indicative <= 0.0 || c.distinctive <= 0.0) continue;
    c.aggregate = std::sqrt(c.indicative * c.distinctive);
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [&](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.aggregate != b.aggregate) return a.aggregate > b.aggregate;
    if (a.count != b.count) return a.count > b.count;
    return vocab.token(a.token) < vocab.token(b.token);
  });
  if (max_seeds > 0 && out.size() > max_seeds) out.resize(max_seeds);
  return out;
}

std::vector<TokenId> noisy_pool(const AspectFrequencyTable& table, const CandidatePool& pool, std::size_t m,
                                const Vocabulary& vocab, const DistinctiveOptions& options) {
  if (m == 0) return {};
  const auto ranked = rank_candidates(table, pool, table.classes() - 1, m, vocab, options);
  std::vector<TokenId> out;
  out.reserve(ranked.size());
  for (const auto& c : ranked) out.push_back(c.token);
  return out;
}

SeedUpdate update_seeds(const SeedSets& previous, std::span<const std::vector<ScoredCandidate>> ranked,
                        std::span<const TokenId> noisy, std::size_t max_seeds, const Vocabulary& vocab) {
  const std::size_t k = previous.k();
  if (ranked.size() != k) throw ValidationError("need one ranked list per aspect");
  if (max_seeds == 0) throw ValidationError("max_seeds must be positive");
  const std::unordered_set<TokenId> noisy_set(noisy.begin(), noisy.end());

  // Owner of every token that survives the noisy filter: highest aggregate,
  // lower aspect index on ties.
  std::unordered_map<TokenId, std::pair<double, std::size_t>> owner;
  for (std::size_t j = 0; j < k; ++j) {
    for (const auto& c : ranked[j]) {
      if (noisy_set.contains(c.token)) continue;
      auto [it, inserted] = owner.try_emplace(c.token, c.aggregate, j);
      if (!inserted && c.aggregate > it->second.first) it->second = {c.aggregate, j};
    }
  }

  SeedUpdate result;
  std::vector<bool> fallback(k, false);
  std::vector<std::vector<TokenId>> next(k);
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_set<TokenId> claimed;
    for (std::size_t j = 0; j < k; ++j) {
      if (fallback[j]) claimed.insert(previous.seeds[j].begin(), previous.seeds[j].end());
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (fallback[j]) continue;
      next[j].clear();
      for (const auto& c : ranked[j]) {
        if (next[j].size() >= max_seeds) break;
        if (noisy_set.contains(c.token) || claimed.contains(c.token)) continue;
        if (owner.at(c.token).second != j) continue;
        next[j].push_back(c.token);
      }
      if (next[j].empty()) {
        fallback[j] = true;
        changed = true;
      }
    }
  }

  std::unordered_set<TokenId> carried;
  for (std::size_t j = 0; j < k; ++j) {
    if (!fallback[j]) continue;
    next[j] = previous.seeds[j];
    carried.insert(next[j].begin(), next[j].end());
    result.warnings.push_back("aspect '" + previous.aspects[j] + "' has no new seed words; keeping previous set");
  }
  for (TokenId w : noisy) {
    if (!carried.contains(w)) result.noisy.push_back(w);
  }

  result.seeds.aspects = previous.aspects;
  result.seeds.seeds = std::move(next);
  result.seeds.iteration = previous.iteration + 1;
  result.seeds.validate(vocab);
  return result;
}

bool converged(const SeedSets& old_seeds, const SeedSets& new_seeds) {
  if (old_seeds.aspects != new_seeds.aspects) throw ValidationError("seed sets cover different aspects");
  for (std::size_t j = 0; j < old_seeds.k(); ++j) {
    const std::set<TokenId> a(old_seeds.seeds[j].begin(), old_seeds.seeds[j].end());
    const std::set<TokenId> b(new_seeds.seeds[j].begin(), new_seeds.seeds[j].end());
    if (a != b) return false;
  }
  return true;
}

}  // namespace aspectseed
