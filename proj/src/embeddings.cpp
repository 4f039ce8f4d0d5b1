#include "aspectseed/embeddings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aspectseed/error.hpp"
#include "aspectseed/rng.hpp"

namespace aspectseed {

EmbeddingTable::EmbeddingTable(std::size_t rows, std::size_t dim) : dim_(dim), data_(rows * dim, 0.0) {
  if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

void EmbeddingTable::scale(double s) {
  for (double& v : data_) v *= s;
}

void EmbeddingTable::normalize_rows() {
  for (std::size_t r = 0; r < rows(); ++r) {
    auto v = row(static_cast<TokenId>(r));
    const double n = std::sqrt(dot(v, v));
    if (n > 0.0) {
      for (double& x : v) x /= n;
    }
  }
}

bool EmbeddingTable::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

std::vector<double> fallback_vector(std::string_view token, std::size_t dim) {
  Rng rng(fnv1a(token));
  const double half = 0.5 / static_cast<double>(dim);
  std::vector<double> v(dim);
  for (double& x : v) x = rng.uniform(-half, half);
  return v;
}

namespace {

struct VectorLine {
  std::string token;
  std::vector<double> values;
};

std::size_t parse_size(std::string_view s, const std::string& source, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError(source, line, "expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_spaces(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

// Reads the whole file; returns header dim and the vector lines in file order.
std::pair<std::size_t, std::vector<VectorLine>> read_vector_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::string source = path.string();

  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing 'count dim' header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_spaces(line);
  if (header.size() != 2) throw ParseError(source, 1, "header must be 'count dim'");
  const std::size_t count = parse_size(header[0], source, 1);
  const std::size_t dim = parse_size(header[1], source, 1);
  if (dim == 0) throw ParseError(source, 1, "dimension must be positive");

  std::vector<VectorLine> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_spaces(line);
    if (fields.size() != dim + 1) {
      throw ParseError(source, lineno,
                       "expected token and " + std::to_string(dim) + " values, got " +
                           std::to_string(fields.empty() ? 0 : fields.size() - 1));
    }
    VectorLine row;
    row.token = std::string(fields[0]);
    row.values.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      auto f = fields[k + 1];
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), row.values[k]);
      if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(row.values[k])) {
        throw ParseError(source, lineno, "bad value '" + std::string(f) + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != count) {
    throw ValidationError(source + ": header declares " + std::to_string(count) + " vectors, file has " +
                          std::to_string(rows.size()));
  }
  return {dim, std::move(rows)};
}

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t expected_dim) {
  auto [dim, rows] = read_vector_file(path);
  if (expected_dim != 0 && dim != expected_dim) {
    throw ValidationError(path.string() + ": dimension " + std::to_string(dim) + " does not match expected " +
                          std::to_string(expected_dim));
  }
  EmbeddingTable table(vocab.size(), dim);
  std::vector<bool> filled(vocab.size(), false);
  for (const auto& r : rows) {
    TokenId id = vocab.id(r.token);
    if (id == Vocabulary::kUnk || filled[id]) continue;
    std::copy(r.values.begin(), r.values.end(), table.row(id).begin());
    filled[id] = true;
  }
  for (TokenId id = 1; id < vocab.size(); ++id) {
    if (!filled[id]) {
      auto v = fallback_vector(vocab.token(id), dim);
      std::copy(v.begin(), v.end(), table.row(id).begin());
    }
  }
  return table;
}

std::pair<Vocabulary, EmbeddingTable> load_vocabulary_and_embeddings(const std::filesystem::path& path) {
  auto [dim, rows] = read_vector_file(path);
  Vocabulary vocab;
  for (const auto& r : rows) {
    if (r.token == Vocabulary::kUnkToken) continue;
    if (vocab.contains(r.token)) throw ValidationError(path.string() + ": duplicate token '" + r.token + "'");
    vocab.add(r.token);
  }
  EmbeddingTable table(vocab.size(), dim);
  for (const auto& r : rows) {
    TokenId id = vocab.id(r.token);
    if (id == Vocabulary::kUnk) continue;
    std::copy(r.values.begin(), r.values.end(), table.row(id).begin());
  }
  return {std::move(vocab), std::move(table)};
}

void save_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (vocab.size() - 1) << ' ' << table.dim() << '\n';
  char buf[64];
  for (TokenId id = 1; id < vocab.size(); ++id) {
    out << vocab.token(id);
    for (double v : table.row(id)) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
  if (!out) throw IoError("error while writing " + path.string());
}

std::uint64_t fingerprint(const Vocabulary& vocab, const EmbeddingTable& table) {
  std::uint64_t h = fnv1a(std::to_string(table.dim()));
  for (const auto& t : vocab.tokens()) {
    h = fnv1a(t, h);
    h = fnv1a("\n", h);
  }
  const auto& data = table.data();
  return fnv1a(std::string_view(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double)), h);
}

namespace {

class NegativeSampler {
 public:
  explicit NegativeSampler(const Corpus& corpus) : cdf_(corpus.vocabulary().size(), 0.0) {
    std::vector<double> counts(cdf_.size(), 0.0);
    for (const auto& s : corpus.segments()) {
      for (TokenId t : s.tokens) counts[t] += 1.0;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      acc += std::pow(counts[i], 0.75);
      cdf_[i] = acc;
    }
  }

  TokenId sample(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<TokenId>(it - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

// One skip-gram pass over a segment. Every context word predicts the centre
// word plus `negatives` sampled words.
void train_segment(const std::vector<TokenId>& segment, const EmbeddingConfig& config, const NegativeSampler& sampler,
                   std::span<const double> keep, double alpha, Rng& rng, EmbeddingTable& input, EmbeddingTable& output,
                   std::vector<double>& grad) {
  const std::size_t dim = input.dim();
  std::vector<TokenId> tokens;
  tokens.reserve(segment.size());
  for (TokenId t : segment) {
    if (keep[t] >= 1.0 || rng.uniform() < keep[t]) tokens.push_back(t);
  }
  const std::size_t n = tokens.size();
  if (n < 2) return;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t reduce = static_cast<std::size_t>(rng.below(config.window));
    const std::size_t win = config.window - reduce;
    const std::size_t lo = i >= win ? i - win : 0;
    const std::size_t hi = std::min(n - 1, i + win);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (j == i) continue;
      auto ctx = input.row(tokens[j]);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t s = 0; s <= config.negatives; ++s) {
        TokenId target;
        double label;
        if (s == 0) {
          target = tokens[i];
          label = 1.0;
        } else {
          target = sampler.sample(rng);
          if (target == tokens[i] || target == Vocabulary::kUnk) continue;
          label = 0.0;
        }
        auto out = output.row(target);
        const double f = dot(ctx, out);
        const double g = (label - 1.0 / (1.0 + std::exp(-f))) * alpha;
        for (std::size_t k = 0; k < dim; ++k) {
          grad[k] += g * out[k];
          out[k] += g * ctx[k];
        }
      }
      for (std::size_t k = 0; k < dim; ++k) ctx[k] += grad[k];
    }
  }
}

}  // namespace

EmbeddingTable train_embeddings(const Corpus& corpus, const EmbeddingConfig& config, const ExecPolicy& policy) {
  if (config.dim == 0) throw ValidationError("embedding dimension must be positive");
  if (config.window == 0) throw ValidationError("embedding window must be positive");
  if (config.epochs == 0) throw ValidationError("embedding epochs must be positive");
  if (corpus.non_empty_count() == 0) throw ValidationError("cannot train embeddings on an empty corpus");
  const std::size_t total = corpus.token_count();
  if (total <= config.window) {
    throw ValidationError("corpus has " + std::to_string(total) + " tokens, not more than the window " +
                          std::to_string(config.window));
  }

  const std::size_t rows = corpus.vocabulary().size();
  const std::size_t dim = config.dim;
  EmbeddingTable input(rows, dim);
  EmbeddingTable output(rows, dim);
  {
    Rng rng(derive_seed(config.seed, 0x5eedULL));
    const double half = 0.5 / static_cast<double>(dim);
    for (TokenId id = 1; id < rows; ++id) {
      for (double& v : input.row(id)) v = rng.uniform(-half, half);
    }
  }

  const NegativeSampler sampler(corpus);
  const auto& segments = corpus.segments();

  // word2vec keep probability: (sqrt(f / (t N)) + 1) t N / f.
  std::vector<double> keep(rows, 1.0);
  if (config.subsample > 0.0) {
    std::vector<double> counts(rows, 0.0);
    for (const auto& s : segments) {
      for (TokenId t : s.tokens) counts[t] += 1.0;
    }
    const double tn = config.subsample * static_cast<double>(total);
    for (std::size_t w = 0; w < rows; ++w) {
      if (counts[w] > 0.0) keep[w] = (std::sqrt(counts[w] / tn) + 1.0) * tn / counts[w];
    }
  }
  std::vector<std::size_t> offset(segments.size() + 1, 0);
  for (std::size_t s = 0; s < segments.size(); ++s) offset[s + 1] = offset[s] + segments[s].tokens.size();
  const double schedule = static_cast<double>(config.epochs * total) + 1.0;

  // Each segment draws from its own stream and its learning rate depends only
  // on its position, so the serial and sharded schedules visit identical updates.
  auto run_one = [&](std::size_t epoch, std::size_t s, std::vector<double>& grad) {
    if (segments[s].tokens.size() < 2) return;
    Rng rng(derive_seed(config.seed, epoch, s));
    const double progress = static_cast<double>(epoch * total + offset[s]) / schedule;
    const double alpha = config.learning_rate * std::max(1e-4, 1.0 - progress);
    train_segment(segments[s].tokens, config, sampler, keep, alpha, rng, input, output, grad);
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (policy.parallel()) {
#pragma omp parallel num_threads(policy.resolved_threads())
      {
        std::vector<double> grad(dim);
#pragma omp for schedule(dynamic, 16)
        for (std::size_t s = 0; s < segments.size(); ++s) run_one(epoch, s, grad);
      }
    } else {
      std::vector<double> grad(dim);
      for (std::size_t s = 0; s < segments.size(); ++s) run_one(epoch, s, grad);
    }
  }

  std::fill(input.row(Vocabulary::kUnk).begin(), input.row(Vocabulary::kUnk).end(), 0.0);
  if (!input.all_finite()) throw NumericError("embedding training produced non-finite values");
  return input;
}

}  // namespace aspectseed
