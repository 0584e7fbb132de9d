#pragma once

#include "budgetcl/mathcore.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace budgetcl {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sample {
  std::uint64_t id = 0;
  Vector features;
  int label = 0;
  std::optional<std::int64_t> timestamp;
};

/// Labeled feature vectors sharing one dimension.
struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 0;
  int feature_dim = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  bool has_timestamps() const;

  /// Throws DataError when an invariant (shared dim, label range, unique ids, finite features) fails.
  void validate() const;
};

enum class Ordering { class_incremental, data_incremental, time_incremental };

Ordering parse_ordering(const std::string& s);
std::string to_string(Ordering o);

struct StreamSpec {
  Ordering ordering = Ordering::class_incremental;
  int num_steps = 20;
  std::uint64_t seed = 0;
};

struct StepBatch {
  int step_index = 0;
  std::vector<Sample> samples;
};

struct SyntheticSpec {
  int num_classes = 10;
  int per_class = 100;
  int feature_dim = 16;
  double class_mean_scale = 3.0;
  double noise_sigma = 1.0;
  double drift_per_unit_time = 0.0;
  std::uint64_t seed = 0;
};

/// Reads the `id,[timestamp,]label,f0,...` CSV schema. When `num_classes` is
/// given, labels at or above it are rejected; otherwise K = max label + 1.
Dataset load_csv(const std::filesystem::path& path, std::optional<int> num_classes = std::nullopt);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

std::vector<Sample> order_stream(const Dataset& ds, const StreamSpec& spec);

/// Contiguous slices; the first N mod T steps get one extra sample.
std::vector<StepBatch> partition_steps(const std::vector<Sample>& ordered, int num_steps);

/// Class means are N(0, I) * class_mean_scale. Samples are emitted
/// interleaved by class (sample i has label i mod K and timestamp i), and each
/// carries drift_per_unit_time * u * i/(N-1) along one seeded unit direction u.
Dataset generate_synthetic(const SyntheticSpec& spec);

/// The unit drift direction and class means used by generate_synthetic.
struct SyntheticGeometry {
  Matrix class_means;  // K x d
  Vector drift_direction;
};
SyntheticGeometry synthetic_geometry(const SyntheticSpec& spec);

/// Splits off floor(fraction * count) samples of every class (at least one
/// when the class has two or more). Held-out samples are the last ones of
/// each class in dataset order.
std::pair<Dataset, Dataset> holdout_split(const Dataset& ds, double fraction);

/// Subset of `ds` whose labels satisfy the predicate; keeps K and d.
template <typename Pred>
Dataset filter_labels(const Dataset& ds, Pred pred) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.feature_dim = ds.feature_dim;
  for (const auto& s : ds.samples) {
    if (pred(s.label)) out.samples.push_back(s);
  }
  return out;
}

}  // namespace budgetcl
