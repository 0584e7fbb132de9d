#include "budgetcl/model.hpp"

#include "budgetcl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace budgetcl {

namespace {

constexpr double kNormFloor = 1e-12;

Vector row_norms(const Matrix& m) {
  Vector n(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) n(r) = std::max(m.row(r).norm(), kNormFloor);
  return n;
}

// Backprop through x -> x/max(|x|, floor) row by row.
Matrix normalize_backward(const Matrix& x, const Vector& norms, const Matrix& dnormalized) {
  Matrix dx(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double n = norms(r);
    if (x.row(r).norm() < kNormFloor) {
      dx.row(r) = dnormalized.row(r) / n;
    } else {
      const auto unit = x.row(r) / n;
      dx.row(r) = (dnormalized.row(r) - unit * unit.dot(dnormalized.row(r))) / n;
    }
  }
  return dx;
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

Vector cosine_row_init(std::uint64_t seed, int row, Eigen::Index dim) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xC05u,
                    static_cast<std::uint32_t>(row)};
  std::mt19937_64 rng(seq);
  return gaussian_matrix(dim, 1, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
}

}  // namespace

std::string to_string(HeadKind h) { return h == HeadKind::linear ? "linear" : "cosine"; }

HeadKind parse_head_kind(const std::string& s) {
  if (s == "linear") return HeadKind::linear;
  if (s == "cosine") return HeadKind::cosine;
  throw std::invalid_argument("unknown head kind '" + s + "'");
}

MlpModel::MlpModel(const ModelSpec& spec)
    : head_kind_(spec.head), cosine_scale_(spec.cosine_scale), pretrain_classes_(spec.num_classes), seed_(spec.seed) {
  if (spec.input_dim < 1) throw DimensionError("model: input_dim must be positive");
  if (spec.num_classes < 0) throw DimensionError("model: negative class count");
  if (spec.head == HeadKind::cosine && !(spec.cosine_scale > 0)) {
    throw std::invalid_argument("model: cosine scale must be positive");
  }
  std::mt19937_64 rng(spec.seed);
  int fan_in = spec.input_dim;
  for (const int width : spec.hidden) {
    if (width < 1) throw DimensionError("model: hidden width must be positive");
    DenseLayer layer;
    layer.weights = gaussian_matrix(width, fan_in, std::sqrt(2.0 / fan_in), rng);
    layer.bias = Vector::Zero(width);
    backbone_.push_back(std::move(layer));
    fan_in = width;
  }
  head_weights_ = gaussian_matrix(spec.num_classes, fan_in, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  if (head_kind_ == HeadKind::linear) head_bias_ = Vector::Zero(spec.num_classes);
}

MlpModel::MlpModel(std::vector<DenseLayer> backbone, Matrix head_weights, Vector head_bias, HeadKind head,
                   double cosine_scale, int pretrain_classes, TrainableScope scope, std::uint64_t seed)
    : backbone_(std::move(backbone)),
      head_weights_(std::move(head_weights)),
      head_bias_(std::move(head_bias)),
      head_kind_(head),
      cosine_scale_(cosine_scale),
      pretrain_classes_(pretrain_classes),
      scope_(scope),
      seed_(seed) {
  Eigen::Index fan_in = backbone_.empty() ? head_weights_.cols() : backbone_.front().weights.cols();
  for (const auto& layer : backbone_) {
    if (layer.weights.cols() != fan_in || layer.bias.size() != layer.weights.rows()) {
      throw DimensionError("model: inconsistent backbone shapes");
    }
    fan_in = layer.weights.rows();
  }
  if (head_weights_.cols() != fan_in) throw DimensionError("model: head width does not match backbone");
  if (head_kind_ == HeadKind::linear && head_bias_.size() != head_weights_.rows()) {
    throw DimensionError("model: head bias size");
  }
  if (head_kind_ == HeadKind::cosine && head_bias_.size() != 0) throw DimensionError("model: cosine head has a bias");
  if (pretrain_classes_ > num_classes()) throw DimensionError("model: pretrain classes exceed head rows");
  if (!parameters_finite()) throw DomainError("model: non-finite parameters");
}

int MlpModel::input_dim() const {
  return static_cast<int>(backbone_.empty() ? head_weights_.cols() : backbone_.front().weights.cols());
}

int MlpModel::feature_dim() const { return static_cast<int>(head_weights_.cols()); }

void MlpModel::check_batch(const Matrix& features) const {
  if (features.cols() != input_dim()) {
    throw DimensionError("model: batch has " + std::to_string(features.cols()) + " features, model expects " +
                         std::to_string(input_dim()));
  }
}

ForwardPass MlpModel::forward(const Matrix& features) const {
  check_batch(features);
  ForwardPass pass;
  pass.activations.reserve(backbone_.size() + 1);
  pass.activations.push_back(features);
  for (const auto& layer : backbone_) {
    Matrix z = pass.activations.back() * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    pass.activations.push_back(z.cwiseMax(0.0));
  }
  const Matrix& h = pass.penultimate();
  if (head_kind_ == HeadKind::linear) {
    pass.logits = h * head_weights_.transpose();
    pass.logits.rowwise() += head_bias_.transpose();
  } else {
    const Matrix hn = row_norms(h).cwiseInverse().asDiagonal() * h;
    const Matrix wn = row_norms(head_weights_).cwiseInverse().asDiagonal() * head_weights_;
    pass.logits = cosine_scale_ * (hn * wn.transpose());
  }
  return pass;
}

Gradients MlpModel::backward(const ForwardPass& pass, const Matrix& dlogits) const {
  const Matrix& h = pass.penultimate();
  if (dlogits.rows() != h.rows() || dlogits.cols() != num_classes()) {
    throw DimensionError("backward: dlogits shape does not match logits");
  }
  Gradients g;
  Matrix dh;
  if (head_kind_ == HeadKind::linear) {
    g.head_weights = dlogits.transpose() * h;
    g.head_bias = dlogits.colwise().sum().transpose();
    dh = dlogits * head_weights_;
  } else {
    const Vector hnorm = row_norms(h);
    const Vector wnorm = row_norms(head_weights_);
    const Matrix hn = hnorm.cwiseInverse().asDiagonal() * h;
    const Matrix wn = wnorm.cwiseInverse().asDiagonal() * head_weights_;
    g.cosine_scale = dlogits.cwiseProduct(hn * wn.transpose()).sum();
    const Matrix dwn = cosine_scale_ * dlogits.transpose() * hn;
    g.head_weights = normalize_backward(head_weights_, wnorm, dwn);
    if (scope_ == TrainableScope::full) {
      dh = normalize_backward(h, hnorm, cosine_scale_ * dlogits * wn);
    }
  }
  if (scope_ == TrainableScope::head_only) return g;

  g.backbone.resize(backbone_.size());
  for (std::size_t l = backbone_.size(); l-- > 0;) {
    const Matrix& out = pass.activations[l + 1];
    const Matrix& in = pass.activations[l];
    const Matrix dz = dh.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
    g.backbone[l].weights = dz.transpose() * in;
    g.backbone[l].bias = dz.colwise().sum().transpose();
    if (l > 0) dh = dz * backbone_[l].weights;
  }
  return g;
}

void MlpModel::apply(const Gradients& grads, double lr, double weight_decay) {
  if (scope_ == TrainableScope::full) {
    if (grads.backbone.size() != backbone_.size()) throw DimensionError("apply: missing backbone gradients");
    for (std::size_t l = 0; l < backbone_.size(); ++l) {
      backbone_[l].weights -= lr * (grads.backbone[l].weights + weight_decay * backbone_[l].weights);
      backbone_[l].bias -= lr * (grads.backbone[l].bias + weight_decay * backbone_[l].bias);
    }
  }
  head_weights_ -= lr * (grads.head_weights + weight_decay * head_weights_);
  if (head_kind_ == HeadKind::linear) {
    head_bias_ -= lr * (grads.head_bias + weight_decay * head_bias_);
  } else {
    cosine_scale_ -= lr * grads.cosine_scale;
  }
  if (!parameters_finite()) throw DomainError("sgd: parameters became non-finite");
}

bool MlpModel::sgd_step(const TrainBatch& batch, const Matrix& dlogits, double lr, double weight_decay,
                        BudgetLedger& ledger) {
  const double needed = BudgetLedger::unit_cost(Category::train_fwd, batch.labels.size()) +
                        BudgetLedger::unit_cost(Category::train_bwd, batch.labels.size(), scope_);
  if (!ledger.can_afford(needed)) return false;
  return sgd_step(batch, forward(batch.features), dlogits, lr, weight_decay, ledger);
}

bool MlpModel::sgd_step(const TrainBatch& batch, const ForwardPass& pass, const Matrix& dlogits, double lr,
                        double weight_decay, BudgetLedger& ledger) {
  const auto n = static_cast<std::size_t>(batch.features.rows());
  if (batch.labels.size() != n) throw DimensionError("sgd_step: label count != batch rows");
  if (pass.logits.rows() != batch.features.rows()) throw DimensionError("sgd_step: forward pass does not match batch");
  const double needed =
      BudgetLedger::unit_cost(Category::train_fwd, n) + BudgetLedger::unit_cost(Category::train_bwd, n, scope_);
  if (!ledger.can_afford(needed)) return false;

  const Gradients grads = backward(pass, dlogits);
  if (!flatten(grads).allFinite()) throw DomainError("sgd_step: non-finite gradient");
  apply(grads, lr, weight_decay);

  const bool ok = ledger.charge(Category::train_fwd, n) && ledger.charge(Category::train_bwd, n, scope_);
  if (!ok) throw std::logic_error("sgd_step: ledger refused a pre-checked charge");
  return true;
}

void MlpModel::expand_head(int new_classes) {
  const int old = num_classes();
  if (new_classes < old) throw std::invalid_argument("expand_head: cannot shrink the head");
  if (new_classes == old) return;
  const Eigen::Index width = head_weights_.cols();
  head_weights_.conservativeResize(new_classes, Eigen::NoChange);
  for (int r = old; r < new_classes; ++r) {
    if (head_kind_ == HeadKind::linear) {
      head_weights_.row(r).setZero();
    } else {
      head_weights_.row(r) = cosine_row_init(seed_, r, width).transpose();
    }
  }
  if (head_kind_ == HeadKind::linear) {
    head_bias_.conservativeResize(new_classes);
    head_bias_.tail(new_classes - old).setZero();
  }
}

Eigen::Index MlpModel::backbone_parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& layer : backbone_) n += layer.weights.size() + layer.bias.size();
  return n;
}

Vector MlpModel::flat_parameters() const {
  Vector theta(backbone_parameter_count() + head_weights_.size() +
               (head_kind_ == HeadKind::linear ? head_bias_.size() : 1));
  Eigen::Index pos = 0;
  auto put = [&](const auto& m) {
    theta.segment(pos, m.size()) = m.reshaped();
    pos += m.size();
  };
  for (const auto& layer : backbone_) {
    put(layer.weights);
    put(layer.bias);
  }
  put(head_weights_);
  if (head_kind_ == HeadKind::linear) {
    put(head_bias_);
  } else {
    theta(pos++) = cosine_scale_;
  }
  return theta;
}

void MlpModel::set_flat_parameters(const Vector& theta) {
  if (theta.size() != flat_parameters().size()) throw DimensionError("set_flat_parameters: size mismatch");
  Eigen::Index pos = 0;
  auto take = [&](auto& m) {
    m.reshaped() = theta.segment(pos, m.size());
    pos += m.size();
  };
  for (auto& layer : backbone_) {
    take(layer.weights);
    take(layer.bias);
  }
  take(head_weights_);
  if (head_kind_ == HeadKind::linear) {
    take(head_bias_);
  } else {
    cosine_scale_ = theta(pos++);
  }
}

Vector MlpModel::flatten(const Gradients& grads) const {
  Vector out = Vector::Zero(flat_parameters().size());
  Eigen::Index pos = 0;
  auto put = [&](const auto& m, Eigen::Index expected) {
    if (m.size() == expected) out.segment(pos, expected) = m.reshaped();
    pos += expected;
  };
  for (std::size_t l = 0; l < backbone_.size(); ++l) {
    const bool have = grads.backbone.size() == backbone_.size();
    put(have ? grads.backbone[l].weights : Matrix(), backbone_[l].weights.size());
    put(have ? grads.backbone[l].bias : Vector(), backbone_[l].bias.size());
  }
  put(grads.head_weights, head_weights_.size());
  if (head_kind_ == HeadKind::linear) {
    put(grads.head_bias, head_bias_.size());
  } else {
    out(pos++) = grads.cosine_scale;
  }
  return out;
}

bool MlpModel::parameters_finite() const {
  for (const auto& layer : backbone_) {
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
  }
  return head_weights_.allFinite() && head_bias_.allFinite() && std::isfinite(cosine_scale_);
}

TrainBatch make_batch(const std::vector<const Sample*>& samples) {
  TrainBatch batch;
  if (samples.empty()) return batch;
  batch.features.resize(static_cast<Eigen::Index>(samples.size()), samples.front()->features.size());
  batch.labels.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    batch.features.row(static_cast<Eigen::Index>(i)) = samples[i]->features.transpose();
    batch.labels.push_back(samples[i]->label);
  }
  return batch;
}

Matrix mean_ce_dlogits(const Matrix& logits, const std::vector<int>& labels, double* mean_loss) {
  const Eigen::Index n = logits.rows();
  Matrix d(n, logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const LossGrad lg = task_loss_grad(logits.row(i).transpose(), labels[static_cast<std::size_t>(i)]);
    d.row(i) = lg.grad.transpose() / static_cast<double>(n);
    total += lg.loss;
  }
  if (mean_loss != nullptr) *mean_loss = n > 0 ? total / static_cast<double>(n) : 0.0;
  return d;
}

void pretrain(MlpModel& model, const Dataset& ds, const PretrainOptions& options, std::mt19937_64& rng) {
  if (options.iterations <= 0) return;
  if (ds.empty()) throw DataError("pretrain: empty dataset");
  if (options.batch < 1) throw std::invalid_argument("pretrain: batch must be positive");
  std::map<int, std::vector<const Sample*>> by_class;
  for (const auto& s : ds.samples) {
    if (s.label >= model.num_classes()) throw DataError("pretrain: label beyond model head");
    by_class[s.label].push_back(&s);
  }
  std::vector<const std::vector<const Sample*>*> classes;
  for (const auto& [label, members] : by_class) classes.push_back(&members);

  const TrainableScope saved = model.scope();
  model.set_scope(TrainableScope::full);
  std::uniform_int_distribution<std::size_t> pick_class(0, classes.size() - 1);
  std::vector<const Sample*> picked(options.batch);
  for (long long it = 0; it < options.iterations; ++it) {
    for (auto& p : picked) {
      const auto& members = *classes[pick_class(rng)];
      std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
      p = members[pick(rng)];
    }
    const TrainBatch batch = make_batch(picked);
    const ForwardPass pass = model.forward(batch.features);
    const Matrix d = mean_ce_dlogits(pass.logits, batch.labels);
    const double lr = options.lr * (1.0 - static_cast<double>(it) / static_cast<double>(options.iterations));
    model.apply(model.backward(pass, d), lr, 0.0);
  }
  model.set_scope(saved);
}

double accuracy(const MlpModel& model, const Dataset& ds) {
  if (ds.empty()) throw DataError("accuracy: empty dataset");
  std::vector<const Sample*> all;
  for (const auto& s : ds.samples) all.push_back(&s);
  const TrainBatch batch = make_batch(all);
  const Matrix logits = model.logits(batch.features);
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (argmax_tiebreak(logits.row(i)) == batch.labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace budgetcl
