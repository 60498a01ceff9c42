#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <boost/rational.hpp>

#include "renorm/ambient.hpp"

namespace renorm {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

/// Reduce r into [0,c) for an integer circumference c.
inline Rational wrap(const Rational& r, std::int64_t c) {
  // floor(r / c) for rationals with positive denominator
  std::int64_t num = r.numerator();
  std::int64_t den = r.denominator() * c;
  std::int64_t fl = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --fl;
  return r - Rational(fl * c);
}

inline std::string to_string(const Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

/// An isometry x -> O x + t with a signed permutation matrix O and an exact
/// rational translation. Composition and inversion stay exact.
struct ExactIsometry {
  IntMat orth;
  std::vector<Rational> shift;

  static ExactIsometry identity(int d) {
    return {IntMat::Identity(d, d), std::vector<Rational>(static_cast<std::size_t>(d), Rational(0))};
  }

  static ExactIsometry translation(std::vector<Rational> t) {
    int d = static_cast<int>(t.size());
    return {IntMat::Identity(d, d), std::move(t)};
  }

  int dim() const { return static_cast<int>(orth.rows()); }

  /// this o other
  ExactIsometry after(const ExactIsometry& other) const {
    int d = dim();
    ExactIsometry out{orth * other.orth, shift};
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (orth(i, j) != 0) out.shift[static_cast<std::size_t>(i)] += Rational(orth(i, j)) * other.shift[static_cast<std::size_t>(j)];
      }
    }
    return out;
  }

  ExactIsometry inverse() const {
    int d = dim();
    ExactIsometry out{orth.transpose(), std::vector<Rational>(static_cast<std::size_t>(d), Rational(0))};
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        if (out.orth(i, j) != 0) out.shift[static_cast<std::size_t>(i)] -= Rational(out.orth(i, j)) * shift[static_cast<std::size_t>(j)];
      }
    }
    return out;
  }

  /// Reduce the translation modulo the periods of an ambient.
  ExactIsometry reduced(const Ambient& a) const {
    ExactIsometry out = *this;
    for (int j = 0; j < a.dim; ++j) {
      if (a.periodic(j)) {
        out.shift[static_cast<std::size_t>(j)] = wrap(out.shift[static_cast<std::size_t>(j)], static_cast<std::int64_t>(a.period(j)));
      }
    }
    return out;
  }

  Mat orth_double() const { return orth.cast<double>(); }

  Vec shift_double() const {
    Vec t(dim());
    for (int j = 0; j < dim(); ++j) t[j] = to_double(shift[static_cast<std::size_t>(j)]);
    return t;
  }

  Vec apply(const Vec& x) const { return orth_double() * x + shift_double(); }

  std::vector<Rational> apply(const std::vector<Rational>& x) const {
    std::vector<Rational> out = shift;
    for (int i = 0; i < dim(); ++i) {
      for (int j = 0; j < dim(); ++j) {
        if (orth(i, j) != 0) out[static_cast<std::size_t>(i)] += Rational(orth(i, j)) * x[static_cast<std::size_t>(j)];
      }
    }
    return out;
  }

  bool is_identity_mod(const Ambient& a) const {
    if (orth != IntMat::Identity(dim(), dim())) return false;
    ExactIsometry r = reduced(a);
    for (const auto& s : r.shift) {
      if (s != Rational(0)) return false;
    }
    return true;
  }

  friend bool operator==(const ExactIsometry& a, const ExactIsometry& b) {
    return a.orth == b.orth && a.shift == b.shift;
  }
};

inline std::vector<Rational> wrap(const Ambient& a, std::vector<Rational> x) {
  for (int j = 0; j < a.dim; ++j) {
    if (a.periodic(j)) x[static_cast<std::size_t>(j)] = wrap(x[static_cast<std::size_t>(j)], static_cast<std::int64_t>(a.period(j)));
  }
  return x;
}

inline Vec to_vec(const std::vector<Rational>& x) {
  Vec v(static_cast<int>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) v[static_cast<int>(j)] = to_double(x[j]);
  return v;
}

}  // namespace renorm
