#pragma once

// Reverse-mode differentiable scalar.
//
// Every DiffScalar is either a constant (no derivative) or a handle to a node
// on the calling thread's Tape. Arithmetic on variables appends nodes that
// store the local partial derivatives; Tape::propagate walks them backwards.
// Constants are folded eagerly so products with structural zeros (skew
// matrices, joint screws) do not grow the tape.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "diffnea/errors.hpp"

namespace diffnea {

class Tape {
 public:
  struct Node {
    std::int32_t lhs;
    std::int32_t rhs;
    double dlhs;
    double drhs;
  };

  /// The tape of the calling thread.
  static Tape& active() {
    thread_local Tape tape;
    return tape;
  }

  std::int32_t push(std::int32_t lhs, double dlhs, std::int32_t rhs, double drhs) {
    nodes_.push_back(Node{lhs, rhs, dlhs, drhs});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Incremented by clear(); handles from an older generation are stale.
  std::uint64_t generation() const noexcept { return generation_; }

  void clear() {
    nodes_.clear();
    ++generation_;
  }

  /// Drops every node recorded after `mark` (a value previously returned by size()).
  void rewind(std::size_t mark) { nodes_.resize(mark); }

  void reserve(std::size_t n) { nodes_.reserve(n); }

  /// Reverse sweep over nodes [begin, end). Adjoints of nodes in that range
  /// are pushed into their parents; `adjoints` must cover at least `end` nodes.
  void propagate(std::span<double> adjoints, std::size_t end, std::size_t begin = 0) const;

 private:
  std::vector<Node> nodes_;
  std::uint64_t generation_ = 0;
};

class DiffScalar {
 public:
  DiffScalar() = default;
  DiffScalar(double value) : value_(value) {}  // NOLINT: constants convert implicitly

  /// A new independent variable on the active tape.
  static DiffScalar variable(double value) {
    return DiffScalar(value, Tape::active().push(-1, 0.0, -1, 0.0));
  }

  double value() const noexcept { return value_; }
  std::int32_t id() const noexcept { return id_; }
  bool is_constant() const noexcept { return id_ < 0; }

  DiffScalar& operator+=(const DiffScalar& rhs) { return *this = *this + rhs; }
  DiffScalar& operator-=(const DiffScalar& rhs) { return *this = *this - rhs; }
  DiffScalar& operator*=(const DiffScalar& rhs) { return *this = *this * rhs; }
  DiffScalar& operator/=(const DiffScalar& rhs) { return *this = *this / rhs; }

  friend DiffScalar operator+(const DiffScalar& a, const DiffScalar& b) {
    if (b.is_constant()) {
      if (b.value_ == 0.0) return a;
      if (a.is_constant()) return DiffScalar(a.value_ + b.value_);
      return unary(a.value_ + b.value_, a, 1.0);
    }
    if (a.is_constant()) {
      if (a.value_ == 0.0) return b;
      return unary(a.value_ + b.value_, b, 1.0);
    }
    return binary(a.value_ + b.value_, a, 1.0, b, 1.0);
  }

  friend DiffScalar operator-(const DiffScalar& a, const DiffScalar& b) {
    if (b.is_constant()) {
      if (b.value_ == 0.0) return a;
      if (a.is_constant()) return DiffScalar(a.value_ - b.value_);
      return unary(a.value_ - b.value_, a, 1.0);
    }
    if (a.is_constant()) return unary(a.value_ - b.value_, b, -1.0);
    return binary(a.value_ - b.value_, a, 1.0, b, -1.0);
  }

  friend DiffScalar operator-(const DiffScalar& a) {
    if (a.is_constant()) return DiffScalar(-a.value_);
    return unary(-a.value_, a, -1.0);
  }

  friend DiffScalar operator+(const DiffScalar& a) { return a; }

  friend DiffScalar operator*(const DiffScalar& a, const DiffScalar& b) {
    if (a.is_constant()) {
      if (b.is_constant()) return DiffScalar(a.value_ * b.value_);
      if (a.value_ == 0.0) return DiffScalar(0.0);
      if (a.value_ == 1.0) return b;
      return unary(a.value_ * b.value_, b, a.value_);
    }
    if (b.is_constant()) {
      if (b.value_ == 0.0) return DiffScalar(0.0);
      if (b.value_ == 1.0) return a;
      return unary(a.value_ * b.value_, a, b.value_);
    }
    return binary(a.value_ * b.value_, a, b.value_, b, a.value_);
  }

  friend DiffScalar operator/(const DiffScalar& a, const DiffScalar& b) {
    if (b.value_ == 0.0) throw DomainError("/", "division by zero");
    const double inv = 1.0 / b.value_;
    const double q = a.value_ * inv;
    if (b.is_constant()) {
      if (a.is_constant()) return DiffScalar(q);
      return unary(q, a, inv);
    }
    if (a.is_constant()) return unary(q, b, -q * inv);
    return binary(q, a, inv, b, -q * inv);
  }

  friend bool operator==(const DiffScalar& a, const DiffScalar& b) { return a.value_ == b.value_; }
  friend bool operator!=(const DiffScalar& a, const DiffScalar& b) { return a.value_ != b.value_; }
  friend bool operator<(const DiffScalar& a, const DiffScalar& b) { return a.value_ < b.value_; }
  friend bool operator<=(const DiffScalar& a, const DiffScalar& b) { return a.value_ <= b.value_; }
  friend bool operator>(const DiffScalar& a, const DiffScalar& b) { return a.value_ > b.value_; }
  friend bool operator>=(const DiffScalar& a, const DiffScalar& b) { return a.value_ >= b.value_; }

  /// Builds the result of a one-argument function with local derivative `d`.
  static DiffScalar unary(double value, const DiffScalar& x, double d) {
    if (x.is_constant()) return DiffScalar(value);
    return DiffScalar(value, Tape::active().push(x.id_, d, -1, 0.0));
  }

  static DiffScalar binary(double value, const DiffScalar& a, double da, const DiffScalar& b,
                           double db) {
    return DiffScalar(value, Tape::active().push(a.id_, da, b.id_, db));
  }

 private:
  DiffScalar(double value, std::int32_t id) : value_(value), id_(id) {}

  double value_ = 0.0;
  std::int32_t id_ = -1;
};

// Elementary functions. sign(0) and the derivative of |x| at 0 are both 0.

inline DiffScalar sin(const DiffScalar& x) {
  return DiffScalar::unary(std::sin(x.value()), x, std::cos(x.value()));
}

inline DiffScalar cos(const DiffScalar& x) {
  return DiffScalar::unary(std::cos(x.value()), x, -std::sin(x.value()));
}

inline DiffScalar exp(const DiffScalar& x) {
  const double e = std::exp(x.value());
  return DiffScalar::unary(e, x, e);
}

inline DiffScalar sqrt(const DiffScalar& x) {
  if (x.value() < 0.0) throw DomainError("sqrt", "negative argument " + std::to_string(x.value()));
  const double r = std::sqrt(x.value());
  return DiffScalar::unary(r, x, r > 0.0 ? 0.5 / r : 0.0);
}

inline DiffScalar tanh(const DiffScalar& x) {
  const double t = std::tanh(x.value());
  return DiffScalar::unary(t, x, 1.0 - t * t);
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline DiffScalar sign(const DiffScalar& x) { return DiffScalar(sign(x.value())); }

inline DiffScalar abs(const DiffScalar& x) {
  return DiffScalar::unary(std::abs(x.value()), x, sign(x.value()));
}

inline double powi(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < (n < 0 ? -n : n); ++i) r *= x;
  return n < 0 ? 1.0 / r : r;
}

inline DiffScalar powi(const DiffScalar& x, int n) {
  if (n < 0 && x.value() == 0.0) throw DomainError("powi", "zero to a negative power");
  if (n == 0) return DiffScalar(1.0);
  return DiffScalar::unary(powi(x.value(), n), x, n * powi(x.value(), n - 1));
}

inline double value_of(double x) { return x; }
inline double value_of(const DiffScalar& x) { return x.value(); }

}  // namespace diffnea

namespace Eigen {

template <>
struct NumTraits<diffnea::DiffScalar> : NumTraits<double> {
  using Real = diffnea::DiffScalar;
  using NonInteger = diffnea::DiffScalar;
  using Nested = diffnea::DiffScalar;
  using Literal = diffnea::DiffScalar;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3
  };
};

}  // namespace Eigen
