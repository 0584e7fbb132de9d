#include "budgetcl/corrections.hpp"

#include <cmath>
#include <stdexcept>

namespace budgetcl {

namespace {

void check_labels(const Matrix& logits, const std::vector<int>& labels) {
  if (logits.rows() == 0) throw DataError("calibration: empty validation set");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) throw DimensionError("calibration: label count");
  for (const int y : labels) {
    if (y < 0 || y >= logits.cols()) throw DimensionError("calibration: label outside logits");
  }
}

struct ValLogits {
  Matrix logits;
  std::vector<int> labels;
};

ValLogits val_logits(const MlpModel& model, const Dataset& val) {
  if (val.empty()) throw DataError("calibration: empty validation set");
  std::vector<const Sample*> rows;
  for (const auto& s : val.samples) rows.push_back(&s);
  TrainBatch b = make_batch(rows);
  return {model.logits(b.features), std::move(b.labels)};
}

struct BicDerivatives {
  double loss = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

BicDerivatives bic_derivatives(const Matrix& logits, const std::vector<int>& labels, const ClassMask& is_new,
                               double alpha, double beta) {
  BicDerivatives d;
  const auto n = static_cast<double>(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Vector z = logits.row(i).transpose();
    Vector zt = z;
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      if (is_new[static_cast<std::size_t>(c)]) zt(c) = alpha * z(c) + beta;
    }
    const int y = labels[static_cast<std::size_t>(i)];
    const double lse = log_sum_exp(zt);
    d.loss += lse - zt(y);
    const Vector p = (zt.array() - lse).exp().matrix();
    double sp = 0, spz = 0, spz2 = 0;
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      if (!is_new[static_cast<std::size_t>(c)]) continue;
      sp += p(c);
      spz += p(c) * z(c);
      spz2 += p(c) * z(c) * z(c);
    }
    const bool y_new = is_new[static_cast<std::size_t>(y)];
    d.grad(0) += spz - (y_new ? z(y) : 0.0);
    d.grad(1) += sp - (y_new ? 1.0 : 0.0);
    d.hess(0, 0) += spz2 - spz * spz;
    d.hess(0, 1) += spz - spz * sp;
    d.hess(1, 1) += sp - sp * sp;
  }
  d.hess(1, 0) = d.hess(0, 1);
  d.loss /= n;
  d.grad /= n;
  d.hess /= n;
  return d;
}

}  // namespace

Vector apply_bic(const Vector& logits, const BicParams& params) {
  if (static_cast<Eigen::Index>(params.new_classes.size()) > logits.size()) {
    throw DimensionError("apply_bic: class mask longer than logits");
  }
  Vector out = logits;
  for (std::size_t c = 0; c < params.new_classes.size(); ++c) {
    if (params.new_classes[c]) out(static_cast<Eigen::Index>(c)) = params.alpha * logits(static_cast<Eigen::Index>(c)) + params.beta;
  }
  return out;
}

Matrix apply_bic(const Matrix& logits, const BicParams& params) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) out.row(i) = apply_bic(Vector(logits.row(i).transpose()), params).transpose();
  return out;
}

double bic_objective(const Matrix& logits, const std::vector<int>& labels, const ClassMask& new_classes, double alpha,
                     double beta) {
  check_labels(logits, labels);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Vector z = logits.row(i).transpose();
    for (Eigen::Index c = 0; c < z.size(); ++c) {
      if (new_classes[static_cast<std::size_t>(c)]) z(c) = alpha * z(c) + beta;
    }
    total += log_sum_exp(z) - z(labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

BicParams fit_bic(const Matrix& logits, const std::vector<int>& labels, const ClassMask& new_classes) {
  check_labels(logits, labels);
  if (static_cast<Eigen::Index>(new_classes.size()) != logits.cols()) throw DimensionError("fit_bic: class mask size");
  bool has_new = false, has_old = false;
  for (const int y : labels) (new_classes[static_cast<std::size_t>(y)] ? has_new : has_old) = true;
  if (!has_new || !has_old) throw DataError("fit_bic: validation set needs both old-class and new-class samples");

  Eigen::Vector2d x(1.0, 0.0);
  BicDerivatives d = bic_derivatives(logits, labels, new_classes, x(0), x(1));
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::Vector2d step;
    const Eigen::LDLT<Eigen::Matrix2d> ldlt(d.hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && d.hess.determinant() > 1e-14) {
      step = -ldlt.solve(d.grad);
    } else {
      step = -d.grad;
    }
    if (step.dot(d.grad) >= 0) step = -d.grad;

    double t = 1.0;
    bool accepted = false;
    BicDerivatives next;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      const Eigen::Vector2d cand = x + t * step;
      if (!(cand(0) > 0)) continue;
      next = bic_derivatives(logits, labels, new_classes, cand(0), cand(1));
      if (next.loss <= d.loss + 1e-4 * t * step.dot(d.grad)) {
        x = cand;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double improvement = d.loss - next.loss;
    d = next;
    if (improvement < 1e-12 && d.grad.norm() < 1e-8) break;
    if (d.grad.norm() < 1e-12) break;
  }
  return {x(0), x(1), new_classes};
}

BicParams fit_bic(const MlpModel& model, const Dataset& val, const ClassMask& new_classes) {
  const ValLogits v = val_logits(model, val);
  return fit_bic(v.logits, v.labels, new_classes);
}

double apply_wa(MlpModel& model, const ClassMask& old_classes, const ClassMask& new_classes) {
  if (model.head_kind() != HeadKind::linear) throw std::invalid_argument("apply_wa: requires a linear head");
  Matrix& w = model.head_weights();
  if (static_cast<Eigen::Index>(old_classes.size()) > w.rows() || static_cast<Eigen::Index>(new_classes.size()) > w.rows()) {
    throw DimensionError("apply_wa: class mask longer than head");
  }
  double old_sum = 0, new_sum = 0;
  int old_n = 0, new_n = 0;
  for (std::size_t c = 0; c < old_classes.size(); ++c) {
    if (old_classes[c]) {
      old_sum += w.row(static_cast<Eigen::Index>(c)).norm();
      ++old_n;
    }
  }
  for (std::size_t c = 0; c < new_classes.size(); ++c) {
    if (new_classes[c]) {
      new_sum += w.row(static_cast<Eigen::Index>(c)).norm();
      ++new_n;
    }
  }
  if (old_n == 0 || new_n == 0) throw std::invalid_argument("apply_wa: both class sets must be non-empty");
  const double new_mean = new_sum / new_n;
  if (!(new_mean > 0)) throw DomainError("apply_wa: new-class rows have zero norm");
  const double gamma = (old_sum / old_n) / new_mean;
  for (std::size_t c = 0; c < new_classes.size(); ++c) {
    if (new_classes[c]) w.row(static_cast<Eigen::Index>(c)) *= gamma;
  }
  return gamma;
}

double temperature_objective(const Matrix& logits, const std::vector<int>& labels, double temperature) {
  check_labels(logits, labels);
  if (!(temperature > 0) || !std::isfinite(temperature)) throw DomainError("temperature must be positive and finite");
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Vector z = logits.row(i).transpose() / temperature;
    total += log_sum_exp(z) - z(labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

double fit_temperature(const Matrix& logits, const std::vector<int>& labels) {
  check_labels(logits, labels);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double log_t) { return temperature_objective(logits, labels, std::exp(log_t)); };
  double a = std::log(kTemperatureMin), b = std::log(kTemperatureMax);
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > kTemperatureTolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  const double t = std::exp(0.5 * (a + b));
  // The identity temperature is always admissible; keep it if the search landed no lower.
  return temperature_objective(logits, labels, t) <= temperature_objective(logits, labels, 1.0) ? t : 1.0;
}

double fit_temperature(const MlpModel& model, const Dataset& val) {
  const ValLogits v = val_logits(model, val);
  return fit_temperature(v.logits, v.labels);
}

}  // namespace budgetcl
