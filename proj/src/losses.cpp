#include "budgetcl/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace budgetcl {

std::string to_string(TaskLoss t) { return t == TaskLoss::ce ? "ce" : "ace"; }

std::string to_string(DistillKind d) {
  switch (d) {
    case DistillKind::none: return "none";
    case DistillKind::bce: return "bce";
    case DistillKind::ce_soft: return "ce_soft";
    case DistillKind::cosine: return "cosine";
    case DistillKind::mse: return "mse";
  }
  return "?";
}

TaskLoss parse_task_loss(const std::string& s) {
  if (s == "ce") return TaskLoss::ce;
  if (s == "ace") return TaskLoss::ace;
  throw std::invalid_argument("unknown task loss '" + s + "'");
}

DistillKind parse_distill_kind(const std::string& s) {
  if (s == "none") return DistillKind::none;
  if (s == "bce") return DistillKind::bce;
  if (s == "ce_soft") return DistillKind::ce_soft;
  if (s == "cosine") return DistillKind::cosine;
  if (s == "mse") return DistillKind::mse;
  throw std::invalid_argument("unknown distillation loss '" + s + "'");
}

void LossConfig::validate() const {
  if (!(temperature > 0)) throw std::invalid_argument("distillation temperature must be positive");
  if (!(lambda >= 0)) throw std::invalid_argument("distillation weight must be non-negative");
}

LossGrad task_loss_grad(const Vector& logits, int label, const ClassMask* mask) {
  const Eigen::Index k = logits.size();
  if (k == 0) throw DomainError("task_loss_grad: empty logits");
  if (label < 0 || label >= k) throw DimensionError("task_loss_grad: label outside logits");

  LossGrad out;
  out.grad = Vector::Zero(k);
  if (mask == nullptr) {
    const double lse = log_sum_exp(logits);
    out.loss = lse - logits(label);
    out.grad = (logits.array() - lse).exp().matrix();
    out.grad(label) -= 1.0;
    return out;
  }

  if (static_cast<Eigen::Index>(mask->size()) != k) throw DimensionError("task_loss_grad: mask size != K");
  if (!(*mask)[label]) throw std::invalid_argument("task_loss_grad: label outside mask");
  std::vector<Eigen::Index> active;
  for (Eigen::Index c = 0; c < k; ++c) {
    if ((*mask)[c]) active.push_back(c);
  }
  Vector sub(static_cast<Eigen::Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) sub(static_cast<Eigen::Index>(i)) = logits(active[i]);
  const double lse = log_sum_exp(sub);
  out.loss = lse - logits(label);
  for (const Eigen::Index c : active) out.grad(c) = std::exp(logits(c) - lse);
  out.grad(label) -= 1.0;
  return out;
}

LossGrad distill_loss_grad(const Vector& student, const Vector& teacher, DistillKind kind, double temperature) {
  const Eigen::Index kt = teacher.size();
  if (kt == 0 || kt > student.size()) {
    throw DimensionError("distill_loss_grad: teacher has " + std::to_string(kt) + " logits, student " +
                         std::to_string(student.size()));
  }
  require_finite(teacher, "distill_loss_grad teacher");

  LossGrad out;
  out.grad = Vector::Zero(student.size());
  const auto s = student.head(kt);
  auto g = out.grad.head(kt);
  const double k = static_cast<double>(kt);

  switch (kind) {
    case DistillKind::none:
      break;
    case DistillKind::mse: {
      const Vector diff = s - teacher;
      out.loss = 0.5 * diff.squaredNorm() / k;
      g = diff / k;
      break;
    }
    case DistillKind::cosine: {
      const double ns = s.norm();
      const double nt = teacher.norm();
      if (!(ns > 0) || !(nt > 0)) throw DomainError("cosine distillation: zero-norm logits");
      const double cos = s.dot(teacher) / (ns * nt);
      out.loss = 1.0 - cos;
      // d cos / ds = t/(|s||t|) - cos * s/|s|^2
      g = -(teacher / (ns * nt) - cos * s / (ns * ns));
      break;
    }
    case DistillKind::bce: {
      double total = 0.0;
      for (Eigen::Index c = 0; c < kt; ++c) {
        const double target = sigmoid(teacher(c));
        total -= target * log_sigmoid(s(c)) + (1.0 - target) * log_sigmoid(-s(c));
        g(c) = (sigmoid(s(c)) - target) / k;
      }
      out.loss = total / k;
      break;
    }
    case DistillKind::ce_soft: {
      if (!(temperature > 0)) throw DomainError("ce_soft: temperature must be positive");
      const Vector ss = s / temperature;
      const Vector target = softmax(teacher / temperature);
      const double lse = log_sum_exp(ss);
      out.loss = temperature * temperature * (target.array() * (lse - ss.array())).sum();
      g = temperature * (softmax(ss) - target);
      break;
    }
  }
  return out;
}

LossGrad combine(const LossGrad& task, const LossGrad& distill, double lambda) {
  if (task.grad.size() != distill.grad.size()) throw DimensionError("combine: gradient sizes differ");
  return {task.loss + lambda * distill.loss, task.grad + lambda * distill.grad};
}

}  // namespace budgetcl
