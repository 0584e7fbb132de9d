#include "budgetcl/budget.hpp"

#include <stdexcept>

namespace budgetcl {

std::string to_string(TrainableScope s) { return s == TrainableScope::full ? "full" : "head_only"; }

TrainableScope parse_scope(const std::string& s) {
  if (s == "full") return TrainableScope::full;
  if (s == "head_only") return TrainableScope::head_only;
  throw std::invalid_argument("unknown trainable scope '" + s + "'");
}

std::string to_string(Category c) {
  switch (c) {
    case Category::train_fwd: return "train_fwd";
    case Category::train_bwd: return "train_bwd";
    case Category::teacher_fwd: return "teacher_fwd";
    case Category::select_fwd: return "select_fwd";
    case Category::calib_fwd: return "calib_fwd";
  }
  return "?";
}

BudgetLedger::BudgetLedger(double capacity_units) : capacity_(capacity_units) {
  if (!(capacity_units >= 0)) throw std::invalid_argument("ledger capacity must be non-negative");
}

double BudgetLedger::unit_cost(Category category, std::size_t n, TrainableScope scope) {
  const double per_sample =
      category == Category::train_bwd
          ? (scope == TrainableScope::full ? CostModel::backward_full_unit : CostModel::backward_head_unit)
          : CostModel::forward_unit;
  return per_sample * static_cast<double>(n);
}

bool BudgetLedger::charge(Category category, std::size_t n, TrainableScope scope) {
  const double units = unit_cost(category, n, scope);
  if (!can_afford(units)) return false;
  spent_ += units;
  by_category_[static_cast<std::size_t>(category)] += units;
  log_.push_back({category, n, units});
  return true;
}

BudgetLedger new_ledger(long long iterations, std::size_t batch) {
  if (iterations < 1 || batch < 1) throw std::invalid_argument("new_ledger: C and B must be at least 1");
  return BudgetLedger(static_cast<double>(iterations) * CostModel::full_iteration(batch));
}

std::string to_string(MethodClass m) {
  switch (m) {
    case MethodClass::naive: return "naive";
    case MethodClass::distillation: return "distillation";
    case MethodClass::costly_sampling: return "costly_sampling";
    case MethodClass::fc_correction: return "fc_correction";
    case MethodClass::linear_probe: return "linear_probe";
  }
  return "?";
}

std::string to_string(BudgetMode m) { return m == BudgetMode::paper ? "paper" : "exact"; }

BudgetMode parse_budget_mode(const std::string& s) {
  if (s == "paper") return BudgetMode::paper;
  if (s == "exact") return BudgetMode::exact;
  throw std::invalid_argument("unknown budget mode '" + s + "'");
}

int iteration_cost_factor(MethodClass m) {
  switch (m) {
    case MethodClass::naive:
    case MethodClass::fc_correction: return 3;
    case MethodClass::distillation: return 4;     // + teacher forward
    case MethodClass::costly_sampling: return 6;  // + forwards over 3x candidates
    case MethodClass::linear_probe: return 1;     // head backward is free
  }
  return 3;
}

long long equivalent_iters(MethodClass m, long long C, BudgetMode mode) {
  if (C < 1) throw std::invalid_argument("equivalent_iters: C must be at least 1");
  if (mode == BudgetMode::exact) return 3 * C / iteration_cost_factor(m);
  switch (m) {
    case MethodClass::naive:
    case MethodClass::fc_correction: return C;
    case MethodClass::distillation: return (2 * C + 1) / 3;  // round(2C/3)
    // floor(C/2): rounding up would overdraw the 6B-per-iteration ledger for odd C.
    case MethodClass::costly_sampling: return C / 2;
    case MethodClass::linear_probe: return 3 * C;
  }
  return C;
}

}  // namespace budgetcl
