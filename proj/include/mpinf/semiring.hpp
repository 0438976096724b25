#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace mpinf {

// Log-domain values live in R ∪ {-inf}. +inf and NaN are never valid.
inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline bool is_valid_value(double x) { return !std::isnan(x) && x < std::numeric_limits<double>::infinity(); }

// Inverse temperature. Finite beta > 0 selects the tempered log-sum-exp
// combine; the infinite case is a distinguished value selecting max.
class temperature {
 public:
  static temperature finite(double beta) {
    if (!(beta > 0) || std::isinf(beta) || std::isnan(beta))
      throw std::invalid_argument("temperature: beta must be finite and > 0");
    return temperature(beta);
  }
  static temperature infinite() { return temperature(std::numeric_limits<double>::infinity()); }

  bool is_infinite() const { return std::isinf(beta_); }
  double beta() const { return beta_; }

  friend bool operator==(const temperature& a, const temperature& b) { return a.beta_ == b.beta_; }

 private:
  explicit temperature(double beta) : beta_(beta) {}
  double beta_;
};

// x ⊕ y at inverse temperature beta: (1/beta) log(e^{beta x} + e^{beta y}),
// evaluated as max + log1p(exp(beta (min - max)))/beta. At beta = inf this
// is max{x, y}. -inf is the neutral element.
inline double combine(temperature t, double x, double y) {
  assert(is_valid_value(x) && is_valid_value(y));
  if (x == neg_inf) return y;
  if (y == neg_inf) return x;
  if (t.is_infinite()) return std::max(x, y);
  const double m = std::max(x, y);
  const double d = std::min(x, y) - m;  // <= 0
  return m + std::log1p(std::exp(t.beta() * d)) / t.beta();
}

// Fold of combine over a sequence, computed in one max-shifted summation
// pass for finite beta. All -inf folds to -inf.
inline double combine_reduce(temperature t, std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("combine_reduce: empty sequence");
  double m = neg_inf;
  for (double v : values) {
    assert(is_valid_value(v));
    m = std::max(m, v);
  }
  if (m == neg_inf || t.is_infinite()) return m;
  double sum = 0.0;
  for (double v : values) {
    if (v != neg_inf) sum += std::exp(t.beta() * (v - m));
  }
  return m + std::log(sum) / t.beta();
}

}  // namespace mpinf
