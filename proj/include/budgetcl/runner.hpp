#pragma once

#include "budgetcl/config.hpp"
#include "budgetcl/corrections.hpp"

#include <array>
#include <optional>
#include <vector>

namespace budgetcl {

struct MetricsRow {
  int step = 0;  // 1-based
  double overall_acc = 0.0;
  double pretrain_acc = 0.0;  // NaN when no test sample belongs to the partition
  double stream_acc = 0.0;
  long long iterations = 0;
  std::array<double, kNumCategories> units{};
  double capacity = 0.0;

  double units_spent() const;
};

struct RunLog {
  nlohmann::json config_echo;
  std::string method_class;
  std::string budget_mode;
  long long allotted_iterations = 0;  // per step (continual) or C (oracle, scaled by t)
  std::vector<MetricsRow> rows;

  double average_acc() const;
};

struct RunResult {
  RunLog log;
  MlpModel model;
};

/// Datasets resolved from a config, labels sharing one class space.
struct PreparedData {
  Dataset pretrain;
  Dataset stream;
  Dataset test;
  int num_classes = 0;
  int pretrain_classes = 0;  // labels [0, pretrain_classes) form the pretrain partition
};

PreparedData prepare_data(const ExperimentConfig& config);

/// lr0 * (1 - i / k_total).
double lr_schedule(long long i, long long k_total, double lr0);

/// Post-hoc logit adjustments applied at evaluation.
struct Calibration {
  std::optional<BicParams> bic;
  double temperature = 1.0;

  Matrix apply(const Matrix& logits) const;
};

struct EvalResult {
  double overall = 0.0;
  double pretrain = 0.0;
  double stream = 0.0;
  std::size_t pretrain_count = 0;
  std::size_t stream_count = 0;
};

/// Top-1 accuracy over test samples whose class is in `seen`, split into
/// pretrain classes and the rest.
EvalResult evaluate(const MlpModel& model, const Dataset& test, const ClassMask& pretrain_classes,
                    const ClassMask& seen, const Calibration& calibration = {});

/// The pretrained starting point shared by continual runs and the oracle.
MlpModel initial_model(const ExperimentConfig& config, const PreparedData& data);

/// Deterministic per-step generator derived from a seed.
std::mt19937_64 step_rng(std::uint64_t seed, int step);

RunResult run_continual(const ExperimentConfig& config, const PreparedData& data);
RunResult run_erm_oracle(const ExperimentConfig& config, const PreparedData& data);

/// Loads data and dispatches on config.erm_oracle.
RunResult run_experiment(const ExperimentConfig& config);

}  // namespace budgetcl
