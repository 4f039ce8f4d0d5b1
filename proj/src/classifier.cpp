#include "aspectseed/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "aspectseed/error.hpp"

namespace aspectseed {

SegmentMatrix build_matrix(std::span<const TokenId> tokens, const EmbeddingTable& table, std::size_t extra_padding) {
  SegmentMatrix m;
  m.dim = table.dim();
  m.length = std::max(tokens.size(), kMinColumns) + extra_padding;
  m.data.assign(m.length * m.dim, 0.0);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    auto src = table.row(tokens[t]);
    std::copy(src.begin(), src.end(), m.data.begin() + static_cast<std::ptrdiff_t>(t * m.dim));
  }
  return m;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (batch_size < 1) throw ValidationError("batch size must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (filters < 1) throw ValidationError("filter count must be at least 1");
}

std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw ValidationError("unknown optimizer '" + s + "'");
}

ClassifierModel::ClassifierModel(std::size_t dim, std::size_t filters, std::size_t classes, double dropout)
    : dim_(dim), filters_(filters), classes_(classes), dropout_(dropout) {
  if (dim == 0 || filters == 0) throw ValidationError("classifier needs positive dimension and filter count");
  if (classes < 2) throw ValidationError("classifier needs at least 2 classes");
  std::size_t off = 0;
  for (std::size_t wi = 0; wi < kWindows.size(); ++wi) {
    window_offset_[wi] = off;
    off += filters * kWindows[wi] * dim + filters;
  }
  output_offset_ = off;
  off += classes * features() + classes;
  params_.assign(off, 0.0);
}

ClassifierModel ClassifierModel::initialized(std::size_t dim, std::size_t filters, std::size_t classes,
                                             double dropout, std::uint64_t seed) {
  ClassifierModel m(dim, filters, classes, dropout);
  Rng rng(derive_seed(seed, 0x1417ULL));
  for (std::size_t wi = 0; wi < kWindows.size(); ++wi) {
    const double limit = std::sqrt(6.0 / static_cast<double>(kWindows[wi] * dim));
    for (std::size_t f = 0; f < filters; ++f) {
      for (double& v : m.kernel(wi, f)) v = rng.uniform(-limit, limit);
    }
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(m.features() + classes));
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t f = 0; f < m.features(); ++f) m.params_[m.output_weight_offset(c, f)] = rng.uniform(-limit, limit);
  }
  return m;
}

std::size_t ClassifierModel::kernel_offset(std::size_t wi, std::size_t f) const {
  return window_offset_[wi] + f * kWindows[wi] * dim_;
}

std::size_t ClassifierModel::conv_bias_offset(std::size_t wi, std::size_t f) const {
  return window_offset_[wi] + filters_ * kWindows[wi] * dim_ + f;
}

std::size_t ClassifierModel::output_weight_offset(std::size_t cls, std::size_t feature) const {
  return output_offset_ + cls * features() + feature;
}

std::size_t ClassifierModel::output_bias_offset(std::size_t cls) const {
  return output_offset_ + classes_ * features() + cls;
}

std::span<double> ClassifierModel::kernel(std::size_t wi, std::size_t f) {
  return {params_.data() + kernel_offset(wi, f), kWindows[wi] * dim_};
}

std::span<const double> ClassifierModel::kernel(std::size_t wi, std::size_t f) const {
  return {params_.data() + kernel_offset(wi, f), kWindows[wi] * dim_};
}

bool ClassifierModel::all_finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

inline double dot_n(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Distribution forward(const ClassifierModel& model, const SegmentMatrix& matrix, bool train_mode, Rng* rng,
                     ForwardTrace* trace) {
  const std::size_t d = model.dim();
  const std::size_t nf = model.filters();
  const std::size_t nfeat = model.features();
  const std::size_t nc = model.classes();
  if (matrix.dim != d) throw ValidationError("segment matrix dimension does not match the model");
  if (matrix.length < kMinColumns) throw ValidationError("segment matrix shorter than the widest window");
  const bool drop = train_mode && model.dropout() > 0.0;
  if (drop && rng == nullptr) throw ValidationError("dropout in training mode needs a random stream");

  ForwardTrace local;
  ForwardTrace& tr = trace ? *trace : local;
  tr.pre_pool.resize(nfeat);
  tr.argmax_pos.resize(nfeat);
  tr.mask.resize(nfeat);
  tr.hidden.resize(nfeat);

  const auto params = model.parameters();
  const double keep_scale = drop ? 1.0 / (1.0 - model.dropout()) : 1.0;
  for (std::size_t wi = 0; wi < kWindows.size(); ++wi) {
    const std::size_t w = kWindows[wi];
    const std::size_t span = w * d;
    const std::size_t positions = matrix.length - w + 1;
    for (std::size_t f = 0; f < nf; ++f) {
      const double* kern = params.data() + model.kernel_offset(wi, f);
      const double bias = params[model.conv_bias_offset(wi, f)];
      double best = -INFINITY;
      std::size_t arg = 0;
      for (std::size_t t = 0; t < positions; ++t) {
        const double s = bias + dot_n(kern, matrix.data.data() + t * d, span);
        if (s > best) {
          best = s;
          arg = t;
        }
      }
      const std::size_t m = wi * nf + f;
      tr.pre_pool[m] = best;
      tr.argmax_pos[m] = arg;
      tr.mask[m] = drop ? (rng->uniform() < model.dropout() ? 0.0 : keep_scale) : 1.0;
      tr.hidden[m] = std::max(best, 0.0) * tr.mask[m];
    }
  }

  std::vector<double> logits(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    logits[c] = params[model.output_bias_offset(c)] +
                dot_n(params.data() + model.output_weight_offset(c, 0), tr.hidden.data(), nfeat);
    if (!std::isfinite(logits[c])) {
      std::ostringstream os;
      os << "non-finite logit for class " << c << " (segment length " << matrix.length << ", max |hidden| ";
      double mx = 0.0;
      for (double h : tr.hidden) mx = std::max(mx, std::abs(h));
      os << mx << ")";
      throw NumericError(os.str());
    }
  }
  tr.probs = softmax(logits);
  return tr.probs;
}

double kl_loss(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size()) {
    throw ValidationError("kl_loss length mismatch: " + std::to_string(q.size()) + " vs " + std::to_string(p.size()));
  }
  double loss = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] <= 0.0) continue;
    loss -= q[j] * std::log(std::max(p[j], 1e-12) / q[j]);
  }
  return loss;
}

void accumulate_gradient(const ClassifierModel& model, const SegmentMatrix& matrix, const ForwardTrace& trace,
                         std::span<const double> target, double scale, std::span<double> grad) {
  const std::size_t d = model.dim();
  const std::size_t nf = model.filters();
  const std::size_t nfeat = model.features();
  const std::size_t nc = model.classes();
  const auto params = model.parameters();

  double q_sum = 0.0;
  for (double q : target) q_sum += q;

  std::vector<double> d_hidden(nfeat, 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    const double dl = scale * (trace.probs[c] * q_sum - target[c]);
    grad[model.output_bias_offset(c)] += dl;
    const std::size_t wo = model.output_weight_offset(c, 0);
    for (std::size_t m = 0; m < nfeat; ++m) {
      grad[wo + m] += dl * trace.hidden[m];
      d_hidden[m] += dl * params[wo + m];
    }
  }
  for (std::size_t m = 0; m < nfeat; ++m) {
    const double g = d_hidden[m] * trace.mask[m];
    if (trace.pre_pool[m] <= 0.0 || g == 0.0) continue;
    const std::size_t wi = m / nf;
    const std::size_t f = m % nf;
    grad[model.conv_bias_offset(wi, f)] += g;
    const std::size_t span = kWindows[wi] * d;
    const double* x = matrix.data.data() + trace.argmax_pos[m] * d;
    double* gk = grad.data() + model.kernel_offset(wi, f);
    for (std::size_t i = 0; i < span; ++i) gk[i] += g * x[i];
  }
}

double batch_loss(const ClassifierModel& model, const LabeledBatch& batch, std::span<double> grad) {
  if (batch.matrices.size() != batch.targets.size() || batch.matrices.empty()) {
    throw ValidationError("batch needs one target per matrix and at least one sample");
  }
  if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.matrices.size());
  double loss = 0.0;
  ForwardTrace trace;
  for (std::size_t i = 0; i < batch.matrices.size(); ++i) {
    const auto p = forward(model, batch.matrices[i], false, nullptr, &trace);
    loss += kl_loss(batch.targets[i], p);
    if (!grad.empty()) accumulate_gradient(model, batch.matrices[i], trace, batch.targets[i], scale, grad);
  }
  return loss * scale;
}

std::vector<double> analytic_gradient(const ClassifierModel& model, const LabeledBatch& batch) {
  std::vector<double> g(model.parameter_count(), 0.0);
  batch_loss(model, batch, g);
  return g;
}

std::vector<double> numeric_gradient(const ClassifierModel& model, const LabeledBatch& batch, double h) {
  ClassifierModel probe = model;
  auto params = probe.parameters();
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = params[i];
    params[i] = orig + h;
    const double up = batch_loss(probe, batch);
    params[i] = orig - h;
    const double down = batch_loss(probe, batch);
    params[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw ValidationError("gradient length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

double gradient_check(const ClassifierModel& model, const LabeledBatch& batch, double h) {
  return max_relative_error(analytic_gradient(model, batch), numeric_gradient(model, batch, h));
}

namespace {

class AdamState {
 public:
  explicit AdamState(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
      v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
      params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
    }
  }

 private:
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

// Loss and gradient contribution of one training sample. The dropout stream
// is keyed by (seed, epoch, segment) so it does not depend on scheduling.
double sample_step(const ClassifierModel& model, const TextSegment& seg, const EmbeddingTable& table,
                   const Distribution& target, const TrainConfig& config, std::size_t epoch, double scale,
                   std::span<double> grad, ForwardTrace& trace) {
  Rng drop(derive_seed(config.seed, 0xd509ULL, epoch, seg.id));
  const auto matrix = build_matrix(seg.tokens, table);
  const auto p = forward(model, matrix, true, &drop, &trace);
  accumulate_gradient(model, matrix, trace, target, scale, grad);
  return kl_loss(target, p);
}

}  // namespace

TrainResult train(ClassifierModel& model, const Corpus& corpus, const EmbeddingTable& table,
                  std::span<const Distribution> targets, const TrainConfig& config, const ExecPolicy& policy) {
  config.validate();
  if (targets.size() != corpus.size()) {
    throw ValidationError("expected " + std::to_string(corpus.size()) + " targets, got " +
                          std::to_string(targets.size()));
  }
  for (const auto& t : targets) {
    if (t.size() != model.classes()) throw ValidationError("target width does not match the classifier");
  }
  if (table.dim() != model.dim()) throw ValidationError("embedding dimension does not match the classifier");
  model.set_dropout(config.dropout);

  std::vector<std::size_t> order;
  for (const auto& s : corpus.segments()) {
    if (!s.empty()) order.push_back(s.id);
  }
  if (order.empty()) throw ValidationError("no non-empty segment to train on");

  const std::size_t n_params = model.parameter_count();
  AdamState adam(n_params);
  std::vector<double> grad(n_params);
  TrainResult result;
  const auto& segs = corpus.segments();
  const int threads = policy.parallel() ? policy.resolved_threads() : 1;
  std::vector<std::vector<double>> thread_grad(static_cast<std::size_t>(threads), std::vector<double>(n_params));
  std::vector<double> sample_loss;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffler(derive_seed(config.seed, 0x5a0ffULL, epoch));
    shuffler.shuffle(order.begin(), order.end());
    double epoch_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      sample_loss.assign(end - start, 0.0);
      try {
        if (threads > 1) {
          std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
#pragma omp parallel num_threads(threads)
          {
            const auto tid = static_cast<std::size_t>(thread_index());
            auto& g = thread_grad[tid];
            std::fill(g.begin(), g.end(), 0.0);
            ForwardTrace trace;
#pragma omp for schedule(static)
            for (std::size_t k = start; k < end; ++k) {
              if (errors[tid]) continue;
              try {
                const auto& seg = segs[order[k]];
                sample_loss[k - start] =
                    sample_step(model, seg, table, targets[seg.id], config, epoch, scale, g, trace);
              } catch (...) {
                errors[tid] = std::current_exception();
              }
            }
          }
          for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
          }
          for (const auto& g : thread_grad) {
            for (std::size_t i = 0; i < n_params; ++i) grad[i] += g[i];
          }
        } else {
          ForwardTrace trace;
          for (std::size_t k = start; k < end; ++k) {
            const auto& seg = segs[order[k]];
            sample_loss[k - start] = sample_step(model, seg, table, targets[seg.id], config, epoch, scale, grad, trace);
          }
        }
      } catch (const NumericError& e) {
        throw TrainingError(epoch, batch_index, e.what());
      }
      double batch_sum = 0.0;
      for (double l : sample_loss) batch_sum += l;
      if (!std::isfinite(batch_sum)) throw TrainingError(epoch, batch_index, "loss is not finite");
      epoch_sum += batch_sum;

      if (config.optimizer == Optimizer::adam) {
        adam.step(model.parameters(), grad, config.learning_rate);
      } else {
        auto params = model.parameters();
        for (std::size_t i = 0; i < n_params; ++i) params[i] -= config.learning_rate * grad[i];
      }
      if (!model.all_finite()) throw TrainingError(epoch, batch_index, "parameters diverged");
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(order.size()));
  }
  return result;
}

std::vector<Distribution> predict_serial(const ClassifierModel& model, const Corpus& corpus,
                                         const EmbeddingTable& table) {
  std::vector<Distribution> out;
  out.reserve(corpus.size());
  for (const auto& seg : corpus.segments()) out.push_back(forward(model, build_matrix(seg.tokens, table)));
  return out;
}

std::vector<Distribution> predict(const ClassifierModel& model, const Corpus& corpus, const EmbeddingTable& table,
                                  const ExecPolicy& policy) {
  if (!policy.parallel()) return predict_serial(model, corpus, table);
  const auto& segs = corpus.segments();
  std::vector<Distribution> out(segs.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 8) num_threads(policy.resolved_threads())
  for (std::size_t i = 0; i < segs.size(); ++i) {
    try {
      out[i] = forward(model, build_matrix(segs[i].tokens, table));
    } catch (...) {
#pragma omp critical(aspectseed_predict_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace aspectseed
