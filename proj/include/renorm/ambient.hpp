#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "renorm/error.hpp"
#include "renorm/linalg.hpp"

namespace renorm {

enum class AmbientKind { Ball, FatTorus, LongFatTorus, Torus };

/// Tolerance for interval coordinates that drift outside their range.
inline constexpr double kDomainTolerance = 1e-9;

/// Phase space description with per-coordinate topology.
///
///   Ball(d)            unit ball of R^d
///   FatTorus(d)        [0,1] x (R/Z)^{d-1}
///   LongFatTorus(d,q)  [0,1/q] x (R/qZ) x (R/Z)^{d-2}
///   Torus(n)           (R/Z)^n
struct Ambient {
  AmbientKind kind = AmbientKind::FatTorus;
  int dim = 2;
  int q = 1;

  static Ambient ball(int d) { return checked({AmbientKind::Ball, d, 1}); }
  static Ambient fat_torus(int d) { return checked({AmbientKind::FatTorus, d, 1}); }
  static Ambient long_fat_torus(int d, int q) {
    if (q < 1) throw Error(ErrorKind::InvalidArgument, "long fat torus needs q >= 1");
    return checked({AmbientKind::LongFatTorus, d, q});
  }
  static Ambient torus(int n) { return checked({AmbientKind::Torus, n, 1}); }

  bool periodic(int j) const {
    switch (kind) {
      case AmbientKind::Ball: return false;
      case AmbientKind::FatTorus:
      case AmbientKind::LongFatTorus: return j > 0;
      case AmbientKind::Torus: return true;
    }
    return false;
  }

  /// Circumference of a periodic coordinate.
  double period(int j) const {
    if (kind == AmbientKind::LongFatTorus && j == 1) return static_cast<double>(q);
    return 1.0;
  }

  double lo(int /*j*/) const {
    if (kind == AmbientKind::Ball) return -1.0;
    return 0.0;
  }

  double hi(int j) const {
    switch (kind) {
      case AmbientKind::Ball: return 1.0;
      case AmbientKind::LongFatTorus:
        return j == 0 ? 1.0 / q : period(j);
      default: return periodic(j) ? period(j) : 1.0;
    }
  }

  double volume() const {
    if (kind == AmbientKind::Ball) {
      return std::pow(M_PI, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
    }
    return 1.0;
  }

  std::string name() const {
    switch (kind) {
      case AmbientKind::Ball: return "Ball(" + std::to_string(dim) + ")";
      case AmbientKind::FatTorus: return "FatTorus(" + std::to_string(dim) + ")";
      case AmbientKind::LongFatTorus:
        return "LongFatTorus(" + std::to_string(dim) + "," + std::to_string(q) + ")";
      case AmbientKind::Torus: return "Torus(" + std::to_string(dim) + ")";
    }
    return "?";
  }

  friend bool operator==(const Ambient& a, const Ambient& b) {
    return a.kind == b.kind && a.dim == b.dim && (a.kind != AmbientKind::LongFatTorus || a.q == b.q);
  }

 private:
  static Ambient checked(Ambient a) {
    int min_dim = a.kind == AmbientKind::Torus ? 1 : 2;
    if (a.dim < min_dim || a.dim > kMaxDim) {
      throw Error(ErrorKind::InvalidArgument, "unsupported dimension " + std::to_string(a.dim));
    }
    return a;
  }
};

inline double wrap(double v, double c) {
  double r = v - c * std::floor(v / c);
  if (r >= c) r -= c;
  if (r < 0.0) r = 0.0;
  return r;
}

/// Reduce periodic coordinates to [0,c) and pull interval coordinates that
/// are within kDomainTolerance back onto their range.
inline void normalize(const Ambient& a, Vec& x) {
  if (x.size() != a.dim) {
    throw Error(ErrorKind::AmbientMismatch, "coordinate count does not match " + a.name());
  }
  if (a.kind == AmbientKind::Ball) {
    double n = x.norm();
    if (!(n <= 1.0 + kDomainTolerance)) {
      throw Error(ErrorKind::DomainEscape, "point outside " + a.name() + " (|x| = " + std::to_string(n) + ")");
    }
    if (n > 1.0) x /= n;
    return;
  }
  for (int j = 0; j < a.dim; ++j) {
    if (a.periodic(j)) {
      x[j] = wrap(x[j], a.period(j));
    } else {
      double lo = a.lo(j), hi = a.hi(j);
      if (!(x[j] >= lo - kDomainTolerance && x[j] <= hi + kDomainTolerance)) {
        throw Error(ErrorKind::DomainEscape, "coordinate " + std::to_string(j) + " = " + std::to_string(x[j]) +
                                                 " outside [" + std::to_string(lo) + "," + std::to_string(hi) +
                                                 "] of " + a.name());
      }
      x[j] = std::clamp(x[j], lo, hi);
    }
  }
}

inline bool contains(const Ambient& a, const Vec& x, double margin = 0.0) {
  if (x.size() != a.dim) return false;
  if (a.kind == AmbientKind::Ball) return x.norm() <= 1.0 - margin;
  for (int j = 0; j < a.dim; ++j) {
    if (a.periodic(j)) continue;
    if (x[j] < a.lo(j) + margin || x[j] > a.hi(j) - margin) return false;
  }
  return true;
}

/// a - b using the shorter arc on periodic coordinates.
inline Vec difference(const Ambient& a, const Vec& x, const Vec& y) {
  Vec d = x - y;
  for (int j = 0; j < a.dim; ++j) {
    if (a.periodic(j)) {
      double c = a.period(j);
      d[j] -= c * std::round(d[j] / c);
    }
  }
  return d;
}

inline double distance(const Ambient& a, const Vec& x, const Vec& y) { return difference(a, x, y).norm(); }

/// A point tagged with the ambient it lives in.
struct Point {
  Vec x;
  Ambient ambient;

  Point() = default;
  Point(Vec coords, Ambient amb) : x(std::move(coords)), ambient(amb) { normalize(ambient, x); }

  int dim() const { return static_cast<int>(x.size()); }
  double operator[](int j) const { return x[j]; }
};

}  // namespace renorm
