#pragma once

#include "budgetcl/budget.hpp"
#include "budgetcl/losses.hpp"
#include "budgetcl/memory.hpp"
#include "budgetcl/model.hpp"
#include "budgetcl/stream.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace budgetcl {

enum class Correction { none, cosfc, ace, bic, wa, temperature };

std::string to_string(Correction c);
Correction parse_correction(const std::string& s);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MethodSpec {
  SamplingStrategy sampling;
  LossConfig loss;
  Correction correction = Correction::none;
  TrainableScope scope = TrainableScope::full;

  bool uses_ace() const { return correction == Correction::ace || loss.task == TaskLoss::ace; }
  HeadKind head_kind() const { return correction == Correction::cosfc ? HeadKind::cosine : HeadKind::linear; }
  /// Which compute normalization the method falls under.
  MethodClass method_class() const;
  void validate(Ordering ordering) const;
};

/// Generated dataset: classes below `pretrain_classes` form the pretrain set,
/// the rest the stream; `test_fraction` of every class is held out for test.
struct SyntheticSource {
  SyntheticSpec spec;
  int pretrain_classes = 0;
  double test_fraction = 0.1;
};

struct DataSource {
  std::optional<std::filesystem::path> pretrain;
  std::optional<std::filesystem::path> stream;
  std::optional<std::filesystem::path> test;
  std::optional<SyntheticSource> synthetic;
};

struct Seeds {
  std::uint64_t stream = 0;
  std::uint64_t init = 0;
  std::uint64_t sampling = 0;
};

struct ExperimentConfig {
  std::string name = "run";
  DataSource data;
  StreamSpec stream;
  long long iterations_per_step = 400;  // C
  std::size_t batch_size = 1500;        // B
  double lr = 0.1;
  std::optional<double> probe_lr;
  double weight_decay = 0.0;
  MethodSpec method;
  BudgetMode budget_mode = BudgetMode::paper;
  bool erm_oracle = false;
  bool charge_calibration = false;
  double calibration_holdout = 0.1;
  std::vector<int> hidden = {64};
  double cosine_scale = 10.0;
  PretrainOptions pretrain;
  Seeds seeds;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Replaces every seed when the variable (BUDGETCL_SEED) is set.
void apply_seed_override(ExperimentConfig& c, const char* env_value);
inline constexpr const char* kSeedEnvVar = "BUDGETCL_SEED";

}  // namespace budgetcl
