#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aspectseed/corpus.hpp"
#include "aspectseed/embeddings.hpp"
#include "aspectseed/parallel.hpp"
#include "aspectseed/pseudo_label.hpp"
#include "aspectseed/rng.hpp"

namespace aspectseed {

inline constexpr std::array<std::size_t, 3> kWindows{2, 3, 4};
inline constexpr std::size_t kMinColumns = 4;

// d x L embedding matrix stored column-major, so the w columns under a
// convolution window are one contiguous run of w*d values.
struct SegmentMatrix {
  std::size_t dim = 0;
  std::size_t length = 0;
  std::vector<double> data;

  std::span<const double> column(std::size_t t) const { return {data.data() + t * dim, dim}; }
  std::span<double> column(std::size_t t) { return {data.data() + t * dim, dim}; }
};

// Token vectors in order, zero-padded to at least kMinColumns (+ extra_padding).
SegmentMatrix build_matrix(std::span<const TokenId> tokens, const EmbeddingTable& table,
                           std::size_t extra_padding = 0);

enum class Optimizer { adam, sgd };

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double dropout = 0.5;
  std::size_t filters = 32;
  std::uint64_t seed = 1;
  Optimizer optimizer = Optimizer::adam;

  void validate() const;
};

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

// 1-D CNN: for each window size a bank of `filters` kernels (window x d) with
// bias, ReLU, max-pool over positions, dropout, then an affine softmax layer.
// All parameters live in one flat vector:
//   [kernels w=2 | bias w=2 | kernels w=3 | bias w=3 | kernels w=4 | bias w=4 | out W (C x 3F) | out b (C)]
class ClassifierModel {
 public:
  ClassifierModel() = default;
  // Zero parameters.
  ClassifierModel(std::size_t dim, std::size_t filters, std::size_t classes, double dropout = 0.0);

  // He-uniform kernels, Glorot-uniform output weights, zero biases.
  static ClassifierModel initialized(std::size_t dim, std::size_t filters, std::size_t classes, double dropout,
                                     std::uint64_t seed);

  std::size_t dim() const { return dim_; }
  std::size_t filters() const { return filters_; }
  std::size_t classes() const { return classes_; }
  std::size_t features() const { return kWindows.size() * filters_; }
  double dropout() const { return dropout_; }
  void set_dropout(double p) { dropout_ = p; }

  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  // Offsets into parameters().
  std::size_t kernel_offset(std::size_t window_index, std::size_t filter) const;
  std::size_t conv_bias_offset(std::size_t window_index, std::size_t filter) const;
  std::size_t output_weight_offset(std::size_t cls, std::size_t feature) const;
  std::size_t output_bias_offset(std::size_t cls) const;

  std::span<double> kernel(std::size_t window_index, std::size_t filter);
  std::span<const double> kernel(std::size_t window_index, std::size_t filter) const;

  bool all_finite() const;

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

 private:
  std::size_t dim_ = 0;
  std::size_t filters_ = 0;
  std::size_t classes_ = 0;
  double dropout_ = 0.0;
  std::array<std::size_t, kWindows.size()> window_offset_{};
  std::size_t output_offset_ = 0;
  std::vector<double> params_;
};

// Intermediate values kept for backpropagation.
struct ForwardTrace {
  std::vector<double> pre_pool;         // max conv response per feature (before ReLU)
  std::vector<std::size_t> argmax_pos;  // position of that max
  std::vector<double> mask;             // dropout scale per feature (1 outside training)
  std::vector<double> hidden;           // pooled, ReLU'd, dropped-out features
  Distribution probs;
};

// Dropout is applied only when train_mode is set; rng must then be non-null.
// Throws NumericError on non-finite activations.
Distribution forward(const ClassifierModel& model, const SegmentMatrix& matrix, bool train_mode = false,
                     Rng* rng = nullptr, ForwardTrace* trace = nullptr);

// KL(q || p) = -sum_j q_j log(p_j / q_j), p floored at 1e-12, 0 log 0 = 0.
double kl_loss(std::span<const double> q, std::span<const double> p);

// Adds scale * dKL(target || p)/dtheta for one traced sample into grad.
void accumulate_gradient(const ClassifierModel& model, const SegmentMatrix& matrix, const ForwardTrace& trace,
                         std::span<const double> target, double scale, std::span<double> grad);

struct LabeledBatch {
  std::vector<SegmentMatrix> matrices;
  std::vector<Distribution> targets;
};

// Mean KL over the batch with dropout off; writes the analytic gradient when grad is non-empty.
double batch_loss(const ClassifierModel& model, const LabeledBatch& batch, std::span<double> grad = {});

std::vector<double> analytic_gradient(const ClassifierModel& model, const LabeledBatch& batch);
// Central differences with step h.
std::vector<double> numeric_gradient(const ClassifierModel& model, const LabeledBatch& batch, double h = 1e-4);
// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-6). The floor keeps round-off on
// exactly-zero gradients from registering as relative error.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);
double gradient_check(const ClassifierModel& model, const LabeledBatch& batch, double h = 1e-4);

struct TrainResult {
  std::vector<double> epoch_loss;  // mean KL per epoch
};

// Mini-batch training on mean KL against soft targets. Empty segments are
// skipped. Throws TrainingError when the loss stops being finite.
TrainResult train(ClassifierModel& model, const Corpus& corpus, const EmbeddingTable& table,
                  std::span<const Distribution> targets, const TrainConfig& config,
                  const ExecPolicy& policy = ExecPolicy::serial());

// Inference pass (no dropout) for every segment, empty ones included.
std::vector<Distribution> predict(const ClassifierModel& model, const Corpus& corpus, const EmbeddingTable& table,
                                  const ExecPolicy& policy = {});
std::vector<Distribution> predict_serial(const ClassifierModel& model, const Corpus& corpus,
                                         const EmbeddingTable& table);

struct Checkpoint {
  ClassifierModel model;
  TrainConfig config;
  std::uint64_t fingerprint = 0;
  std::vector<std::string> class_names;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws ValidationError when expected_fingerprint is given and differs.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint64_t> expected_fingerprint = {});

}  // namespace aspectseed
