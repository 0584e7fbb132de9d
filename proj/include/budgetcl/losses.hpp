#pragma once

#include "budgetcl/mathcore.hpp"

#include <optional>
#include <string>
#include <vector>

namespace budgetcl {

enum class TaskLoss { ce, ace };
enum class DistillKind { none, bce, ce_soft, cosine, mse };

std::string to_string(TaskLoss t);
std::string to_string(DistillKind d);
TaskLoss parse_task_loss(const std::string& s);
DistillKind parse_distill_kind(const std::string& s);

struct LossConfig {
  TaskLoss task = TaskLoss::ce;
  DistillKind distill = DistillKind::none;
  double temperature = 2.0;  // ce_soft only
  double lambda = 1.0;

  void validate() const;
};

/// A scalar loss together with its gradient w.r.t. the logits it was computed from.
struct LossGrad {
  double loss = 0.0;
  Vector grad;
};

/// Class membership mask over [0, K); true = participates.
using ClassMask = std::vector<bool>;

/// Softmax cross-entropy. With a mask, both softmax and loss are restricted to
/// the masked-in coordinates and masked-out gradient entries are exactly zero.
LossGrad task_loss_grad(const Vector& logits, int label, const ClassMask* mask = nullptr);

/// Distillation toward teacher logits. Only the first teacher.size()
/// coordinates of the student take part; the gradient is zero beyond them.
LossGrad distill_loss_grad(const Vector& student, const Vector& teacher, DistillKind kind, double temperature = 2.0);

/// loss_task + lambda * loss_distill (and likewise for gradients).
LossGrad combine(const LossGrad& task, const LossGrad& distill, double lambda);

}  // namespace budgetcl
