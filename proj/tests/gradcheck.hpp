#pragma once

// Network-level gradient check: analytic backward vs central differences of
// the reference losses in oracles.hpp, evaluated through forward() only.

#include "oracles.hpp"

#include "budgetcl/losses.hpp"
#include "budgetcl/model.hpp"

#include <random>
#include <string>

namespace gradcheck {

using namespace budgetcl;

enum class LossUnderTest { ce, masked_ce, mse, cosine, bce, ce_soft };

inline std::string name(LossUnderTest l) {
  switch (l) {
    case LossUnderTest::ce: return "ce";
    case LossUnderTest::masked_ce: return "masked_ce";
    case LossUnderTest::mse: return "mse";
    case LossUnderTest::cosine: return "cosine";
    case LossUnderTest::bce: return "bce";
    case LossUnderTest::ce_soft: return "ce_soft";
  }
  return "?";
}

inline DistillKind distill_kind(LossUnderTest l) {
  switch (l) {
    case LossUnderTest::mse: return DistillKind::mse;
    case LossUnderTest::cosine: return DistillKind::cosine;
    case LossUnderTest::bce: return DistillKind::bce;
    case LossUnderTest::ce_soft: return DistillKind::ce_soft;
    default: return DistillKind::none;
  }
}

struct Result {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  double max_frozen_gradient = 0.0;  // largest |grad| reported on frozen backbone coordinates
};

struct Setup {
  int input_dim = 6;
  std::vector<int> hidden = {12, 10};
  int classes = 12;
  int teacher_classes = 9;
  int rows = 4;
  std::size_t coordinates = 120;
  double tau = 2.0;
  std::uint64_t seed = 5;
};

inline Result run(LossUnderTest loss, HeadKind head, TrainableScope scope, const Setup& s = {}) {
  std::mt19937_64 rng(s.seed * 1000 + static_cast<std::uint64_t>(loss) * 10 + (head == HeadKind::cosine) * 2 +
                      (scope == TrainableScope::head_only));
  ModelSpec spec;
  spec.input_dim = s.input_dim;
  spec.hidden = s.hidden;
  spec.num_classes = s.classes;
  spec.head = head;
  spec.cosine_scale = 3.0;
  spec.seed = rng();
  MlpModel model(spec);
  model.set_scope(scope);

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(s.rows, s.input_dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  std::vector<int> labels;
  Matrix teacher(s.rows, s.teacher_classes);
  for (Eigen::Index i = 0; i < teacher.size(); ++i) teacher.data()[i] = 2.0 * normal(rng);
  ClassMask mask(static_cast<std::size_t>(s.classes), false);
  for (int i = 0; i < s.rows; ++i) {
    labels.push_back(static_cast<int>(rng() % static_cast<std::uint64_t>(s.classes)));
    mask[static_cast<std::size_t>(labels.back())] = true;
  }
  mask[0] = true;

  auto row_ref = [&](const Vector& z, int i) {
    switch (loss) {
      case LossUnderTest::ce: return oracle::ce(z, labels[static_cast<std::size_t>(i)]);
      case LossUnderTest::masked_ce: return oracle::masked_ce(z, labels[static_cast<std::size_t>(i)], mask);
      default: return oracle::distill(z, teacher.row(i).transpose(), distill_kind(loss), s.tau);
    }
  };
  auto objective = [&](const Vector& theta) {
    MlpModel probe = model;
    probe.set_flat_parameters(theta);
    const Matrix z = probe.logits(x);
    double total = 0;
    for (int i = 0; i < s.rows; ++i) total += row_ref(z.row(i).transpose(), i);
    return total / s.rows;
  };

  const ForwardPass pass = model.forward(x);
  Matrix dlogits(s.rows, s.classes);
  for (int i = 0; i < s.rows; ++i) {
    const Vector z = pass.logits.row(i).transpose();
    LossGrad g;
    switch (loss) {
      case LossUnderTest::ce: g = task_loss_grad(z, labels[static_cast<std::size_t>(i)]); break;
      case LossUnderTest::masked_ce: g = task_loss_grad(z, labels[static_cast<std::size_t>(i)], &mask); break;
      default: g = distill_loss_grad(z, teacher.row(i).transpose(), distill_kind(loss), s.tau);
    }
    dlogits.row(i) = g.grad.transpose() / s.rows;
  }
  const Vector analytic = model.flatten(model.backward(pass, dlogits));
  const Vector theta = model.flat_parameters();

  const Eigen::Index first = scope == TrainableScope::head_only ? model.backbone_parameter_count() : 0;
  const Eigen::Index span = theta.size() - first;
  Result r;
  if (first > 0) r.max_frozen_gradient = analytic.head(first).cwiseAbs().maxCoeff();
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(span));
  for (Eigen::Index i = 0; i < span; ++i) coords[static_cast<std::size_t>(i)] = first + i;
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(std::min(coords.size(), s.coordinates));
  for (const Eigen::Index i : coords) {
    const double numeric = oracle::central_difference(objective, theta, i);
    r.max_relative_error = std::max(r.max_relative_error, oracle::relative_error(analytic(i), numeric, 1e-6));
  }
  r.coordinates = coords.size();
  return r;
}

}  // namespace gradcheck
