#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace budgetcl {

enum class TrainableScope { full, head_only };

std::string to_string(TrainableScope s);
TrainableScope parse_scope(const std::string& s);

/// Per-sample compute units. A forward pass costs half a full backward pass;
/// a head-only backward is free, which makes linear probing exactly 3x cheaper
/// than a full iteration.
struct CostModel {
  static constexpr double forward_unit = 1.0;
  static constexpr double backward_full_unit = 2.0;
  static constexpr double backward_head_unit = 0.0;

  static constexpr double full_iteration(std::size_t batch) {
    return static_cast<double>(batch) * (forward_unit + backward_full_unit);
  }
};
static_assert(CostModel::forward_unit * 2 == CostModel::backward_full_unit);

enum class Category { train_fwd, train_bwd, teacher_fwd, select_fwd, calib_fwd };
inline constexpr std::size_t kNumCategories = 5;
inline constexpr std::array<Category, kNumCategories> kAllCategories = {
    Category::train_fwd, Category::train_bwd, Category::teacher_fwd, Category::select_fwd, Category::calib_fwd};

std::string to_string(Category c);

struct LedgerEntry {
  Category category;
  std::size_t sample_count;
  double units;
};

/// Per-step compute account. Charges are atomic: a charge that would exceed
/// capacity is refused and leaves the ledger untouched.
class BudgetLedger {
 public:
  explicit BudgetLedger(double capacity_units);

  /// Units for n samples in `category`; `scope` matters only for train_bwd.
  static double unit_cost(Category category, std::size_t n, TrainableScope scope = TrainableScope::full);

  [[nodiscard]] bool charge(Category category, std::size_t n, TrainableScope scope = TrainableScope::full);
  bool can_afford(double units) const { return spent_ + units <= capacity_; }

  double capacity() const { return capacity_; }
  double spent() const { return spent_; }
  double remaining() const { return capacity_ - spent_; }
  double spent_in(Category c) const { return by_category_[static_cast<std::size_t>(c)]; }
  const std::vector<LedgerEntry>& log() const { return log_; }

 private:
  double capacity_;
  double spent_ = 0.0;
  std::array<double, kNumCategories> by_category_{};
  std::vector<LedgerEntry> log_;
};

/// Ledger holding `iterations` full training iterations of batch `batch`.
BudgetLedger new_ledger(long long iterations, std::size_t batch);

enum class MethodClass { naive, distillation, costly_sampling, fc_correction, linear_probe };
enum class BudgetMode { paper, exact };

std::string to_string(MethodClass m);
std::string to_string(BudgetMode m);
BudgetMode parse_budget_mode(const std::string& s);

/// Per-iteration cost of a method class, in multiples of the batch size.
int iteration_cost_factor(MethodClass m);

/// Training iterations granted to a method class under per-step budget C.
long long equivalent_iters(MethodClass m, long long C, BudgetMode mode);

}  // namespace budgetcl
