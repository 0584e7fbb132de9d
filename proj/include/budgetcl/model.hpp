#pragma once

#include "budgetcl/budget.hpp"
#include "budgetcl/mathcore.hpp"
#include "budgetcl/stream.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace budgetcl {

enum class HeadKind { linear, cosine };

std::string to_string(HeadKind h);
HeadKind parse_head_kind(const std::string& s);

struct ModelSpec {
  int input_dim = 0;
  std::vector<int> hidden = {64};
  int num_classes = 0;  // initial head rows, i.e. the pretrain classes
  HeadKind head = HeadKind::linear;
  double cosine_scale = 10.0;
  std::uint64_t seed = 0;
};

/// One affine layer; weights are (out x in).
struct DenseLayer {
  Matrix weights;
  Vector bias;
};

struct TrainBatch {
  Matrix features;  // B x d
  std::vector<int> labels;
};

/// Activations kept for backprop: [input, hidden_1, ..., hidden_L] (post-ReLU).
struct ForwardPass {
  std::vector<Matrix> activations;
  Matrix logits;  // B x K

  const Matrix& penultimate() const { return activations.back(); }
};

/// Parameter gradients. `backbone` is empty when only the head is trainable.
struct Gradients {
  std::vector<DenseLayer> backbone;
  Matrix head_weights;
  Vector head_bias;
  double cosine_scale = 0.0;
};

/// Small ReLU MLP with a growable classification head.
///
/// The linear head computes `h W^T + b`. The cosine head computes
/// `eta * <h/|h|, w_c/|w_c|>` with one learnable scale eta and no bias; norms
/// below 1e-12 are clamped so that all-zero ReLU features stay finite.
class MlpModel {
 public:
  explicit MlpModel(const ModelSpec& spec);
  MlpModel(std::vector<DenseLayer> backbone, Matrix head_weights, Vector head_bias, HeadKind head,
           double cosine_scale, int pretrain_classes, TrainableScope scope, std::uint64_t seed);

  ForwardPass forward(const Matrix& features) const;
  Matrix logits(const Matrix& features) const { return forward(features).logits; }

  /// Gradients for `dlogits` (B x K); backbone terms only under full scope.
  Gradients backward(const ForwardPass& pass, const Matrix& dlogits) const;

  /// theta <- theta - lr * (grad + weight_decay * theta) on trainable parameters.
  void apply(const Gradients& grads, double lr, double weight_decay);

  /// One budgeted SGD update. Returns false, with nothing charged or changed,
  /// when the ledger cannot cover B forward units plus the backward units for
  /// the current scope.
  [[nodiscard]] bool sgd_step(const TrainBatch& batch, const Matrix& dlogits, double lr, double weight_decay,
                              BudgetLedger& ledger);
  /// Same, reusing the forward pass the caller computed dlogits from.
  [[nodiscard]] bool sgd_step(const TrainBatch& batch, const ForwardPass& pass, const Matrix& dlogits, double lr,
                              double weight_decay, BudgetLedger& ledger);

  /// Grows the head to `new_classes` rows. Old rows are kept bit-for-bit. New
  /// linear rows and biases are zero; new cosine rows get a small seeded
  /// random direction, since a zero row has no defined cosine.
  void expand_head(int new_classes);

  void set_scope(TrainableScope scope) { scope_ = scope; }
  TrainableScope scope() const { return scope_; }

  int input_dim() const;
  int feature_dim() const;
  int num_classes() const { return static_cast<int>(head_weights_.rows()); }
  int pretrain_classes() const { return pretrain_classes_; }
  HeadKind head_kind() const { return head_kind_; }
  double cosine_scale() const { return cosine_scale_; }
  std::uint64_t seed() const { return seed_; }

  const std::vector<DenseLayer>& backbone() const { return backbone_; }
  const Matrix& head_weights() const { return head_weights_; }
  const Vector& head_bias() const { return head_bias_; }
  Matrix& head_weights() { return head_weights_; }

  /// All parameters in a fixed order: layer weights and biases, head weights,
  /// head bias (linear) or cosine scale (cosine).
  Vector flat_parameters() const;
  void set_flat_parameters(const Vector& theta);
  /// Gradients in flat_parameters order; frozen backbone entries are zero.
  Vector flatten(const Gradients& grads) const;
  /// Number of leading flat entries that belong to the backbone.
  Eigen::Index backbone_parameter_count() const;

  bool parameters_finite() const;

 private:
  void check_batch(const Matrix& features) const;

  std::vector<DenseLayer> backbone_;
  Matrix head_weights_;
  Vector head_bias_;
  HeadKind head_kind_ = HeadKind::linear;
  double cosine_scale_ = 10.0;
  int pretrain_classes_ = 0;
  TrainableScope scope_ = TrainableScope::full;
  std::uint64_t seed_ = 0;
};

/// Packs dataset rows into a batch.
TrainBatch make_batch(const std::vector<const Sample*>& samples);

/// Mean cross-entropy gradient over a batch (dlogits already divided by B).
Matrix mean_ce_dlogits(const Matrix& logits, const std::vector<int>& labels, double* mean_loss = nullptr);

struct PretrainOptions {
  long long iterations = 500;
  double lr = 0.1;
  std::size_t batch = 64;
};

/// Full-scope SGD with class-balanced batches and a linear learning-rate decay.
/// Runs outside any step budget.
void pretrain(MlpModel& model, const Dataset& ds, const PretrainOptions& options, std::mt19937_64& rng);

/// Top-1 accuracy of `model` on `ds`.
double accuracy(const MlpModel& model, const Dataset& ds);

inline constexpr int kCheckpointVersion = 1;
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace budgetcl
