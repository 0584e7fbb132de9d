#include "budgetcl/mathcore.hpp"

#include "doctest.h"

#include <cmath>

using namespace budgetcl;

TEST_CASE("matmul on hand-worked cases") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  CHECK(matmul(Matrix(Matrix::Identity(2, 2)), a) == a);

  Matrix ones(2, 1);
  ones << 1, 1;
  const Matrix r = matmul(a, ones);
  CHECK(r(0, 0) == 3);
  CHECK(r(1, 0) == 7);

  const Matrix z = matmul(Matrix(Matrix::Zero(3, 2)), a);
  CHECK(z.isZero(0));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
}

TEST_CASE("matmul works in single precision") {
  MatrixX<float> a(1, 2);
  a << 1.5f, 2.0f;
  MatrixX<float> b(2, 1);
  b << 2.0f, 1.0f;
  CHECK(matmul(a, b)(0, 0) == doctest::Approx(5.0f));
}

TEST_CASE("softmax closed forms and shift invariance") {
  const Vector half = softmax(Vector(Vector::Zero(2)));
  CHECK(half(0) == doctest::Approx(0.5));
  CHECK(half(1) == doctest::Approx(0.5));

  Vector v(2);
  v << std::log(2.0), 0.0;
  const Vector p = softmax(v);
  CHECK(p(0) == doctest::Approx(2.0 / 3.0));
  CHECK(p(1) == doctest::Approx(1.0 / 3.0));

  Vector w(4);
  w << 0.3, -1.2, 5.0, 2.2;
  const Vector shifted = softmax(Vector(w.array() + 123.0));
  CHECK((softmax(w) - shifted).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax stays finite for huge logits") {
  Vector v(3);
  v << 1000.0, 999.0, -1000.0;
  const Vector p = softmax(v);
  CHECK(all_finite(p));
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(1.0 + std::exp(-1.0))));
}

TEST_CASE("l2_normalize") {
  Vector v(2);
  v << 3, 4;
  const Vector n = l2_normalize(v);
  CHECK(n(0) == doctest::Approx(0.6));
  CHECK(n(1) == doctest::Approx(0.8));
  CHECK(l2_normalize(n).isApprox(n));
  CHECK_THROWS_AS(l2_normalize(Vector(Vector::Zero(2))), DomainError);
}

TEST_CASE("argmax ties go to the lowest index") {
  Vector a(3);
  a << 1, 3, 2;
  CHECK(argmax_tiebreak(a) == 1);
  Vector b(2);
  b << 5, 5;
  CHECK(argmax_tiebreak(b) == 0);
  Vector c(1);
  c << 7;
  CHECK(argmax_tiebreak(c) == 0);
}

TEST_CASE("entropy bounds") {
  Vector uniform = Vector::Constant(4, 0.25);
  CHECK(entropy(uniform) == doctest::Approx(std::log(4.0)));
  Vector onehot = Vector::Zero(4);
  onehot(2) = 1.0;
  CHECK(entropy(onehot) == doctest::Approx(0.0));
}

TEST_CASE("log_sigmoid matches the direct formula and saturates safely") {
  for (double x : {-5.0, -0.5, 0.0, 0.7, 4.0}) {
    CHECK(log_sigmoid(x) == doctest::Approx(std::log(1.0 / (1.0 + std::exp(-x)))));
  }
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
}

TEST_CASE("require_finite throws on NaN") {
  Vector v(2);
  v << 1.0, std::nan("");
  CHECK_THROWS_AS(require_finite(v, "v"), DomainError);
}
