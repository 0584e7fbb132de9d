#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace budgetcl {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vector = VectorX<double>;
using Matrix = MatrixX<double>;

/// Raised when operand shapes do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on numerically degenerate input (empty vectors, zero norms, NaN).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw DomainError(std::string(what) + ": non-finite entry");
}

template <typename A, typename B>
MatrixX<typename A::Scalar> matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  return a * b;
}

/// Max-shifted softmax; throws on empty input.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw DomainError("softmax: empty input");
  const Scalar shift = v.maxCoeff();
  VectorX<Scalar> e = (v.derived().reshaped().array() - shift).exp().matrix();
  return e / e.sum();
}

/// log(sum(exp(v))) with max shift.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using std::exp;
  using std::log;
  if (v.size() == 0) throw DomainError("log_sum_exp: empty input");
  const auto shift = v.maxCoeff();
  return shift + log((v.derived().array() - shift).exp().sum());
}

template <typename Derived>
VectorX<typename Derived::Scalar> l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  const auto norm = v.norm();
  if (!(norm > 0)) throw DomainError("l2_normalize: zero-norm vector");
  return v.derived().reshaped() / norm;
}

/// Index of the maximum; lowest index wins ties.
template <typename Derived>
Eigen::Index argmax_tiebreak(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw DomainError("argmax_tiebreak: empty input");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= 0) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// log(sigmoid(x)) without overflow.
template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  using std::exp;
  using std::log1p;
  return x >= 0 ? -log1p(exp(-x)) : x - log1p(exp(x));
}

/// Shannon entropy (nats) of a probability vector.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0) h -= p(i) * std::log(p(i));
  }
  return h;
}

}  // namespace budgetcl
