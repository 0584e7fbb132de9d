#pragma once

#include "budgetcl/budget.hpp"
#include "budgetcl/model.hpp"
#include "budgetcl/stream.hpp"

#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace budgetcl {

struct MemoryEntry {
  Sample sample;
  int arrival_step = 0;
};

/// Append-only archive of every revealed sample, indexed by class and by step.
class MemoryStore {
 public:
  /// Requires batch.step_index == last_step() + 1, or 0 on an empty store.
  void append_step(const StepBatch& batch);
  /// Adds samples to the most recent step (its index range stays contiguous).
  void extend_current_step(const std::vector<Sample>& samples);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const MemoryEntry& entry(std::size_t i) const { return entries_.at(i); }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

  /// -1 when nothing has been appended.
  int last_step() const { return static_cast<int>(step_ranges_.size()) - 1; }
  std::pair<std::size_t, std::size_t> step_range(int step) const { return step_ranges_.at(static_cast<std::size_t>(step)); }
  const std::vector<std::size_t>& class_indices(int label) const;
  /// Labels with at least one entry, ascending.
  std::vector<int> classes_present() const;

 private:
  std::vector<MemoryEntry> entries_;
  std::vector<std::vector<std::size_t>> per_class_;
  std::vector<std::pair<std::size_t, std::size_t>> step_ranges_;

  void push(const Sample& s, int step);
};

enum class SamplingKind { uniform, class_balanced, recency, fifo, max_loss, uncertainty, kmeans };

std::string to_string(SamplingKind k);
SamplingKind parse_sampling_kind(const std::string& s);

struct SamplingStrategy {
  SamplingKind kind = SamplingKind::class_balanced;
  double recency_decay = 0.5;

  bool costly() const {
    return kind == SamplingKind::max_loss || kind == SamplingKind::uncertainty || kind == SamplingKind::kmeans;
  }
};

/// m entry indices drawn with replacement by an inexpensive strategy:
///   uniform         every entry equally likely
///   class_balanced  class uniform over classes present, then entry uniform in class
///   recency         entry weight decay^(last_step - arrival_step)
///   fifo            uniform over the most recent step
std::vector<std::size_t> draw_batch(const MemoryStore& store, const SamplingStrategy& strategy, std::size_t m,
                                    std::mt19937_64& rng);

/// 3m entry indices, uniform with replacement.
std::vector<std::size_t> draw_candidates(const MemoryStore& store, std::size_t m, std::mt19937_64& rng);

/// Picks m = |candidates|/3 entries by the costly strategy after charging 3m
/// select_fwd units. Returns nullopt, charging nothing, when the ledger
/// cannot afford the candidate forwards. Ties keep candidate order.
std::optional<std::vector<std::size_t>> costly_select(const SamplingStrategy& strategy,
                                                      std::span<const std::size_t> candidates,
                                                      const MemoryStore& store, const MlpModel& model,
                                                      BudgetLedger& ledger, std::mt19937_64& rng);

/// Per-candidate informativeness used by max_loss (cross-entropy) and
/// uncertainty (predictive entropy).
std::vector<double> candidate_scores(SamplingKind kind, const Matrix& logits, const std::vector<int>& labels);

/// k-means with k = m: seeded k-means++ seeding, then exactly 10 Lloyd
/// iterations. Returns one row position per cluster (the member nearest its
/// centroid); an empty cluster contributes the unselected row farthest from
/// everything already chosen.
std::vector<std::size_t> kmeans_select(const Matrix& features, std::size_t m, std::mt19937_64& rng);

inline constexpr int kKmeansIterations = 10;

}  // namespace budgetcl
