#pragma once

#include "budgetcl/losses.hpp"
#include "budgetcl/model.hpp"

#include <vector>

namespace budgetcl {

/// Affine rescaling of new-class logits: z_c <- alpha * z_c + beta.
struct BicParams {
  double alpha = 1.0;
  double beta = 0.0;
  ClassMask new_classes;
};

Vector apply_bic(const Vector& logits, const BicParams& params);
Matrix apply_bic(const Matrix& logits, const BicParams& params);

/// Mean cross-entropy after the BiC transform.
double bic_objective(const Matrix& logits, const std::vector<int>& labels, const ClassMask& new_classes, double alpha,
                     double beta);

/// Minimizes bic_objective over (alpha > 0, beta) with damped Newton steps
/// from (1, 0). The objective is convex in (alpha, beta), so every accepted
/// step decreases it. Requires labels from both the new and the old group.
BicParams fit_bic(const Matrix& logits, const std::vector<int>& labels, const ClassMask& new_classes);
BicParams fit_bic(const MlpModel& model, const Dataset& val, const ClassMask& new_classes);

/// Scales new-class head rows by gamma = mean |W_old| / mean |W_new|.
/// Returns gamma. Linear heads only.
double apply_wa(MlpModel& model, const ClassMask& old_classes, const ClassMask& new_classes);

/// Mean cross-entropy of softmax(logits / T).
double temperature_objective(const Matrix& logits, const std::vector<int>& labels, double temperature);

/// Golden-section search on log T over [ln 0.05, ln 20].
double fit_temperature(const Matrix& logits, const std::vector<int>& labels);
double fit_temperature(const MlpModel& model, const Dataset& val);

inline constexpr double kTemperatureMin = 0.05;
inline constexpr double kTemperatureMax = 20.0;
inline constexpr double kTemperatureTolerance = 1e-4;

}  // namespace budgetcl
