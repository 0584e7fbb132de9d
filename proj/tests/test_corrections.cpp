#include "budgetcl/corrections.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace budgetcl;

namespace {

ClassMask new_mask(int k, int first_new) {
  ClassMask m(static_cast<std::size_t>(k), false);
  for (int c = first_new; c < k; ++c) m[static_cast<std::size_t>(c)] = true;
  return m;
}

oracle::CalibratedSet biased_set(double bias, std::uint64_t seed) {
  auto set = oracle::calibrated_logits(3000, 6, 1.5, seed);
  set.logits.rightCols(3).array() += bias;
  return set;
}

}  // namespace

TEST_CASE("apply_bic arithmetic") {
  Vector z(3);
  z << 1.0, -2.0, 3.0;
  BicParams id{1.0, 0.0, {false, false, true}};
  CHECK(apply_bic(z, id) == z);

  BicParams p{2.0, 1.0, {false, false, true}};
  const Vector out = apply_bic(z, p);
  CHECK(out(0) == 1.0);
  CHECK(out(1) == -2.0);
  CHECK(out(2) == 7.0);

  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Matrix mo = apply_bic(m, p);
  CHECK(mo.leftCols(2) == m.leftCols(2));
  CHECK(mo(1, 2) == 13.0);
}

TEST_CASE("BiC recovers an injected bias on new-class logits") {
  const auto set = biased_set(2.0, 31);
  const ClassMask mask = new_mask(6, 3);
  const BicParams fit = fit_bic(set.logits, set.labels, mask);
  CHECK(fit.beta >= -2.2);
  CHECK(fit.beta <= -1.8);
  CHECK(fit.alpha >= 0.9);
  CHECK(fit.alpha <= 1.1);

  const auto grid = oracle::bic_grid(set.logits, set.labels, mask, 51, 121);
  CHECK(std::abs(fit.alpha - grid.alpha) <= 0.02 + 1e-9);
  CHECK(std::abs(fit.beta - grid.beta) <= 0.05 + 1e-9);
  CHECK(bic_objective(set.logits, set.labels, mask, fit.alpha, fit.beta) <= grid.loss + 1e-12);
  CHECK(bic_objective(set.logits, set.labels, mask, 1.3, 0.4) ==
        doctest::Approx(oracle::bic_loss(set.logits, set.labels, mask, 1.3, 0.4)).epsilon(1e-12));
}

TEST_CASE("BiC leaves calibrated logits nearly alone") {
  const auto set = biased_set(0.0, 32);
  const BicParams fit = fit_bic(set.logits, set.labels, new_mask(6, 3));
  CHECK(std::abs(fit.alpha - 1.0) < 0.1);
  CHECK(std::abs(fit.beta) < 0.1);
}

TEST_CASE("BiC input errors") {
  CHECK_THROWS(fit_bic(Matrix(0, 4), {}, new_mask(4, 2)));
  CHECK_THROWS(fit_bic(Matrix::Zero(2, 4), {0, 1}, new_mask(3, 2)));
}

TEST_CASE("BiC on a model requires both old and new classes in validation") {
  ModelSpec spec;
  spec.input_dim = 2;
  spec.hidden = {};
  spec.num_classes = 4;
  const MlpModel model(spec);
  Dataset val;
  val.num_classes = 4;
  val.feature_dim = 2;
  for (std::uint64_t i = 0; i < 6; ++i) val.samples.push_back({i, Vector::Ones(2), 0, {}});
  CHECK_THROWS_AS(fit_bic(model, val, new_mask(4, 2)), DataError);
  CHECK_THROWS_AS(fit_bic(model, Dataset{{}, 4, 2}, new_mask(4, 2)), DataError);
}

TEST_CASE("WA rescales new rows to the old mean norm") {
  ModelSpec spec;
  spec.input_dim = 3;
  spec.hidden = {};
  spec.num_classes = 4;
  MlpModel model(spec);
  Matrix& w = model.head_weights();
  w.setZero();
  w(0, 0) = 2.0;
  w(1, 1) = 2.0;
  w(2, 2) = 4.0;
  w(3, 0) = 4.0;
  const Matrix x = Matrix::Random(5, 3);
  const Matrix old_z = model.logits(x);
  const double gamma = apply_wa(model, {true, true, false, false}, {false, false, true, true});
  CHECK(gamma == 0.5);
  CHECK(model.head_weights()(2, 2) == 2.0);
  CHECK(model.logits(x).leftCols(2) == old_z.leftCols(2));
}

TEST_CASE("WA equalises mean row norms for random heads") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    ModelSpec spec;
    spec.input_dim = 8;
    spec.hidden = {6};
    spec.num_classes = 10;
    spec.seed = rng();
    MlpModel model(spec);
    model.head_weights().bottomRows(4) *= 3.0 + trial;
    ClassMask old_c(10, false), new_c(10, false);
    for (int c = 0; c < 10; ++c) (c < 6 ? old_c : new_c)[static_cast<std::size_t>(c)] = true;
    apply_wa(model, old_c, new_c);
    const Matrix& w = model.head_weights();
    double old_mean = 0, new_mean = 0;
    for (int c = 0; c < 6; ++c) old_mean += w.row(c).norm() / 6;
    for (int c = 6; c < 10; ++c) new_mean += w.row(c).norm() / 4;
    CHECK(std::abs(old_mean - new_mean) < 1e-9);
  }
}

TEST_CASE("WA rejects cosine heads") {
  ModelSpec spec;
  spec.input_dim = 2;
  spec.hidden = {};
  spec.num_classes = 2;
  spec.head = HeadKind::cosine;
  MlpModel model(spec);
  CHECK_THROWS(apply_wa(model, {true, false}, {false, true}));
}

TEST_CASE("temperature scaling on calibrated and doubled logits") {
  const auto set = oracle::calibrated_logits(4000, 5, 1.5, 77);
  const double t1 = fit_temperature(set.logits, set.labels);
  CHECK(t1 >= 0.9);
  CHECK(t1 <= 1.1);
  const double scan1 = oracle::temperature_scan(set.logits, set.labels, 1201);
  CHECK(std::abs(t1 - scan1) / scan1 < 0.01);

  const Matrix doubled = 2.0 * set.logits;
  const double t2 = fit_temperature(doubled, set.labels);
  CHECK(t2 >= 1.8);
  CHECK(t2 <= 2.2);
  const double scan2 = oracle::temperature_scan(doubled, set.labels, 1201);
  CHECK(std::abs(t2 - scan2) / scan2 < 0.01);
}

TEST_CASE("temperature is invariant to the order of validation rows") {
  auto set = oracle::calibrated_logits(500, 4, 2.0, 5);
  const double before = fit_temperature(set.logits, set.labels);
  std::vector<int> perm(500);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix shuffled(500, 4);
  std::vector<int> labels(500);
  for (int i = 0; i < 500; ++i) {
    shuffled.row(i) = set.logits.row(perm[static_cast<std::size_t>(i)]);
    labels[static_cast<std::size_t>(i)] = set.labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  CHECK(fit_temperature(shuffled, labels) == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("temperature objective matches the reference") {
  const auto set = oracle::calibrated_logits(100, 3, 1.0, 9);
  for (double t : {0.3, 1.0, 4.0}) {
    CHECK(temperature_objective(set.logits, set.labels, t) ==
          doctest::Approx(oracle::temperature_loss(set.logits, set.labels, t)).epsilon(1e-12));
  }
  CHECK_THROWS(temperature_objective(set.logits, set.labels, 0.0));
}
