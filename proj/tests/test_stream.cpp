#include "budgetcl/stream.hpp"

#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

using namespace budgetcl;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name, const std::string& body) {
  const fs::path dir = fs::temp_directory_path() / "budgetcl_test_stream";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << body;
  return p;
}

Sample make_sample(std::uint64_t id, int label, std::optional<std::int64_t> ts = std::nullopt) {
  Sample s;
  s.id = id;
  s.label = label;
  s.features = Vector::Constant(2, static_cast<double>(id));
  s.timestamp = ts;
  return s;
}

Dataset from_samples(std::vector<Sample> samples, int k) {
  Dataset ds;
  ds.samples = std::move(samples);
  ds.num_classes = k;
  ds.feature_dim = 2;
  return ds;
}

}  // namespace

TEST_CASE("load_csv with timestamp column") {
  const auto p = temp_file("ts.csv", "id,timestamp,label,f0,f1\n0,5,1,0.5,1.5\n1,6,0,2.0,-1.0\n");
  const Dataset ds = load_csv(p);
  REQUIRE(ds.size() == 2);
  CHECK(ds.feature_dim == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.has_timestamps());
  CHECK(ds.samples[0].timestamp == 5);
  CHECK(ds.samples[1].features(1) == -1.0);
}

TEST_CASE("load_csv without timestamps") {
  const auto p = temp_file("nots.csv", "id,label,f0,f1\n3,0,1,2\n4,1,3,4\n");
  const Dataset ds = load_csv(p, 4);
  CHECK(!ds.has_timestamps());
  CHECK(ds.num_classes == 4);
  CHECK(ds.samples[1].id == 4);
}

TEST_CASE("load_csv rejects malformed input") {
  CHECK_THROWS_AS(load_csv(temp_file("bad.csv", "id,label,f0,f1\n0,0,1,2,3\n")), DataError);
  CHECK_THROWS_AS(load_csv(temp_file("badnum.csv", "id,label,f0\n0,0,abc\n")), DataError);
  CHECK_THROWS_AS(load_csv(temp_file("labelrange.csv", "id,label,f0\n0,5,1\n"), 3), DataError);
  CHECK_THROWS_AS(load_csv("/nonexistent/budgetcl.csv"), DataError);
}

TEST_CASE("write_csv and load_csv round-trip exactly") {
  SyntheticSpec spec;
  spec.num_classes = 3;
  spec.per_class = 4;
  spec.feature_dim = 5;
  spec.seed = 9;
  const Dataset ds = generate_synthetic(spec);
  const auto p = fs::temp_directory_path() / "budgetcl_test_stream" / "roundtrip.csv";
  write_csv(ds, p);
  const Dataset back = load_csv(p, 3);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.samples[i].id == ds.samples[i].id);
    CHECK(back.samples[i].label == ds.samples[i].label);
    CHECK(back.samples[i].timestamp == ds.samples[i].timestamp);
    CHECK(back.samples[i].features == ds.samples[i].features);
  }
}

TEST_CASE("class-incremental ordering groups labels with ids ascending") {
  const Dataset ds = from_samples({make_sample(5, 1), make_sample(2, 0), make_sample(1, 0)}, 2);
  const auto ordered = order_stream(ds, {Ordering::class_incremental, 1, 0});
  CHECK(ordered[0].label == 0);
  CHECK(ordered[0].id == 1);
  CHECK(ordered[1].id == 2);
  CHECK(ordered[2].label == 1);
}

TEST_CASE("time-incremental ordering sorts by timestamp") {
  const Dataset ds = from_samples({make_sample(0, 0, 30), make_sample(1, 0, 10), make_sample(2, 1, 20)}, 2);
  const auto ordered = order_stream(ds, {Ordering::time_incremental, 1, 0});
  CHECK(*ordered[0].timestamp == 10);
  CHECK(*ordered[1].timestamp == 20);
  CHECK(*ordered[2].timestamp == 30);
  const Dataset no_ts = from_samples({make_sample(0, 0)}, 1);
  CHECK_THROWS_AS(order_stream(no_ts, {Ordering::time_incremental, 1, 0}), DataError);
}

TEST_CASE("data-incremental ordering is a seeded permutation") {
  std::vector<Sample> s;
  for (std::uint64_t i = 0; i < 50; ++i) s.push_back(make_sample(i, static_cast<int>(i % 3)));
  const Dataset ds = from_samples(s, 3);
  const auto a = order_stream(ds, {Ordering::data_incremental, 1, 7});
  const auto b = order_stream(ds, {Ordering::data_incremental, 1, 7});
  const auto c = order_stream(ds, {Ordering::data_incremental, 1, 8});
  bool same_ab = true, same_ac = true;
  std::vector<bool> seen(50, false);
  for (std::size_t i = 0; i < 50; ++i) {
    same_ab = same_ab && a[i].id == b[i].id;
    same_ac = same_ac && a[i].id == c[i].id;
    seen[a[i].id] = true;
  }
  CHECK(same_ab);
  CHECK(!same_ac);
  CHECK(std::all_of(seen.begin(), seen.end(), [](bool x) { return x; }));
}

TEST_CASE("partition_steps sizes") {
  std::vector<Sample> s(100);
  for (const auto& b : partition_steps(s, 20)) CHECK(b.samples.size() == 5);

  std::vector<Sample> ten(10);
  const auto steps = partition_steps(ten, 3);
  REQUIRE(steps.size() == 3);
  CHECK(steps[0].samples.size() == 4);
  CHECK(steps[1].samples.size() == 3);
  CHECK(steps[2].samples.size() == 3);
  CHECK(steps[2].step_index == 2);

  CHECK_THROWS(partition_steps(std::vector<Sample>(2), 3));
  CHECK_THROWS(partition_steps(ten, 0));
}

TEST_CASE("partition_steps at full benchmark scale keeps the per-step arithmetic") {
  // 1.2M samples in 20 steps gives 60K per step. The samples are cheap
  // placeholders with no features.
  std::vector<Sample> big(1'200'000);
  const auto steps = partition_steps(big, 20);
  for (const auto& b : steps) CHECK(b.samples.size() == 60'000);
}

TEST_CASE("generate_synthetic layout and determinism") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.per_class = 3;
  spec.feature_dim = 4;
  spec.seed = 3;
  const Dataset a = generate_synthetic(spec);
  CHECK(a.size() == 6);
  std::map<int, int> counts;
  for (const auto& s : a.samples) ++counts[s.label];
  CHECK(counts[0] == 3);
  CHECK(counts[1] == 3);

  const Dataset b = generate_synthetic(spec);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i].features == b.samples[i].features);

  spec.feature_dim = 0;
  CHECK_THROWS(generate_synthetic(spec));
}

TEST_CASE("synthetic drift shifts late samples along the drift direction") {
  // With drift magnitude 1 and timestamps 0..N-1 the offset of a sample at
  // time t is u * t / (N-1). Over the last decile of a class the mean offset
  // is close to 0.95 u. Compare the empirical mean to that formula within
  // 3 sigma / sqrt(m) per coordinate.
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.per_class = 5000;
  spec.feature_dim = 4;
  spec.noise_sigma = 1.0;
  spec.drift_per_unit_time = 1.0;
  spec.seed = 21;
  const Dataset ds = generate_synthetic(spec);
  const SyntheticGeometry geo = synthetic_geometry(spec);
  const double n_total = static_cast<double>(ds.size());

  const int c = 1;
  std::vector<const Sample*> cls;
  for (const auto& s : ds.samples) {
    if (s.label == c) cls.push_back(&s);
  }
  std::sort(cls.begin(), cls.end(), [](auto* a, auto* b) { return *a->timestamp < *b->timestamp; });
  const std::size_t start = cls.size() - cls.size() / 10;
  Vector mean = Vector::Zero(4);
  double expected_t = 0;
  for (std::size_t i = start; i < cls.size(); ++i) {
    mean += cls[i]->features;
    expected_t += static_cast<double>(*cls[i]->timestamp) / (n_total - 1);
  }
  const double m = static_cast<double>(cls.size() - start);
  mean /= m;
  expected_t /= m;
  CHECK(expected_t == doctest::Approx(0.95).epsilon(0.01));

  const Vector offset = mean - geo.class_means.row(c).transpose();
  const Vector expected = geo.drift_direction * expected_t;
  const double tol = 3.0 * spec.noise_sigma / std::sqrt(m);
  for (Eigen::Index j = 0; j < 4; ++j) CHECK(std::abs(offset(j) - expected(j)) < tol);
}

TEST_CASE("holdout_split takes a per-class fraction with disjoint ids") {
  SyntheticSpec spec;
  spec.num_classes = 10;
  spec.per_class = 100;
  spec.feature_dim = 3;
  const auto [train, test] = holdout_split(generate_synthetic(spec), 0.1);
  CHECK(train.size() == 900);
  CHECK(test.size() == 100);
  std::map<int, int> per;
  for (const auto& s : test.samples) ++per[s.label];
  for (int k = 0; k < 10; ++k) CHECK(per[k] == 10);
  std::set<std::uint64_t> ids;
  for (const auto& s : train.samples) ids.insert(s.id);
  for (const auto& s : test.samples) CHECK(ids.count(s.id) == 0);
}

TEST_CASE("Dataset::validate catches inconsistent samples") {
  Dataset ds = from_samples({make_sample(0, 0), make_sample(0, 1)}, 2);
  CHECK_THROWS_AS(ds.validate(), DataError);  // duplicate id
  ds = from_samples({make_sample(0, 3)}, 2);
  CHECK_THROWS_AS(ds.validate(), DataError);  // label out of range
}

TEST_CASE("ordering names parse") {
  CHECK(parse_ordering("time_incremental") == Ordering::time_incremental);
  CHECK(to_string(Ordering::data_incremental) == "data_incremental");
  CHECK_THROWS(parse_ordering("random"));
}
