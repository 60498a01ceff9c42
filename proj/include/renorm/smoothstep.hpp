#pragma once

#include <cmath>
#include <vector>

#include "renorm/error.hpp"

namespace renorm {

/// Polynomial smoothstep S of order m on [0,1]: S(0)=0, S(1)=1 and the first
/// m derivatives vanish at both ends, so the extension by 0 and 1 is C^m.
/// Degree 2m+1.
class Smoothstep {
 public:
  explicit Smoothstep(int order = 3) : order_(order) {
    if (order < 1) throw Error(ErrorKind::InvalidArgument, "smoothstep order must be >= 1");
    // S(t) = sum_{k=0}^{m} C(m+k,k) C(2m+1, m-k) (-1)^k t^{m+k+1}
    int m = order;
    coeffs_.assign(static_cast<std::size_t>(2 * m + 2), 0.0);
    for (int k = 0; k <= m; ++k) {
      double c = binom(m + k, k) * binom(2 * m + 1, m - k) * ((k % 2) ? -1.0 : 1.0);
      coeffs_[static_cast<std::size_t>(m + k + 1)] = c;
    }
  }

  int order() const { return order_; }

  /// n-th derivative at t, with the constant extension outside [0,1].
  double derivative(double t, int n = 0) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return n == 0 ? 1.0 : 0.0;
    // S(t) = 1 - S(1-t); evaluating near 0 keeps the alternating sum small
    if (t > 0.5) {
      double v = derivative(1.0 - t, n);
      return n == 0 ? 1.0 - v : ((n % 2) ? v : -v);
    }
    if (n == 0) {
      // t^{m+1} sum_k C(m+k,k) (1-t)^k has no cancellation
      double acc = 0.0;
      for (int k = order_; k >= 0; --k) acc = acc * (1.0 - t) + binom(order_ + k, k);
      return acc * std::pow(t, order_ + 1);
    }
    double acc = 0.0;
    for (int p = static_cast<int>(coeffs_.size()) - 1; p >= n; --p) {
      double c = coeffs_[static_cast<std::size_t>(p)];
      for (int i = 0; i < n; ++i) c *= (p - i);
      acc = acc * t + c;
    }
    return acc;
  }

  double operator()(double t) const { return derivative(t, 0); }

  /// int_0^t S, with S extended by 0 and 1.
  double integral(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 0.5 + (t - 1.0);
    if (t > 0.5) return t - 0.5 + integral(1.0 - t);
    double acc = 0.0;
    for (int p = static_cast<int>(coeffs_.size()) - 1; p >= 0; --p) acc = acc * t + coeffs_[static_cast<std::size_t>(p)] / (p + 1);
    return acc * t;
  }

 private:
  static double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
  }

  int order_;
  std::vector<double> coeffs_;
};

}  // namespace renorm
