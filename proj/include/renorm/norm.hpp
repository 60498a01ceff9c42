#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "renorm/map_expr.hpp"
#include "renorm/parallel.hpp"

namespace renorm {

struct Box {
  Vec lo;
  Vec hi;
};

/// Sampling layout for norm estimation: a tensor grid on each box.
struct GridSpec {
  std::vector<Box> boxes;
  int points_per_axis = 21;
  double stencil_step = 1e-4;    // finite-difference step for derivatives
  double holder_distance = 1e-3; // pair distances are drawn from [h, 2h]
  std::uint64_t seed = 7;

  static GridSpec uniform(Box box, int n) {
    GridSpec g;
    g.boxes.push_back(std::move(box));
    g.points_per_axis = n;
    return g;
  }

  double spacing() const {
    double s = 0.0;
    for (const auto& b : boxes) s = std::max(s, sup_norm(Vec(b.hi - b.lo)) / std::max(1, points_per_axis - 1));
    return s;
  }
};

/// Grid estimate of ||m - Id||_r for r = k + eps. A lower bound of the true
/// norm; the stencil resolution is reported with the value.
struct NormEstimate {
  double value = 0.0;
  double sup_part = 0.0;     // max over |alpha| <= k of sup |D^alpha (m - Id)|
  double holder_part = 0.0;  // max over |alpha| = k of the eps-Holder quotient
  std::vector<double> per_order;  // sup over |alpha| = j, j = 0..k
  int order = 0;
  double epsilon = 0.0;
  double spacing = 0.0;
  double stencil_step = 0.0;
  std::size_t points_used = 0;
  std::size_t points_skipped = 0;
};

namespace detail {

// 1D central difference weights on offsets -2..2, scaled by h^order later.
inline const std::array<double, 5>& fd_weights(int order) {
  static const std::array<std::array<double, 5>, 5> w = {{
      {0.0, 0.0, 1.0, 0.0, 0.0},
      {0.0, -0.5, 0.0, 0.5, 0.0},
      {0.0, 1.0, -2.0, 1.0, 0.0},
      {-0.5, 1.0, 0.0, -1.0, 0.5},
      {1.0, -4.0, 6.0, -4.0, 1.0},
  }};
  return w[static_cast<std::size_t>(order)];
}

inline std::vector<std::vector<int>> multi_indices(int d, int total) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(static_cast<std::size_t>(d), 0);
  auto rec = [&](auto&& self, int j, int left) -> void {
    if (j == d - 1) {
      a[static_cast<std::size_t>(j)] = left;
      out.push_back(a);
      return;
    }
    for (int v = left; v >= 0; --v) {
      a[static_cast<std::size_t>(j)] = v;
      self(self, j + 1, left - v);
    }
  };
  rec(rec, 0, total);
  return out;
}

/// All derivatives D^alpha u, |alpha| <= k, of the displacement u = m - Id at p.
/// Returns one vector per multi-index in the order of `indices`.
inline std::vector<Vec> displacement_derivatives(const MapNode& m, const Vec& p, double h,
                                                 const std::vector<std::vector<int>>& indices, int radius) {
  const Ambient& a = m.source();
  int d = a.dim;
  int width = 2 * radius + 1;
  int count = 1;
  for (int j = 0; j < d; ++j) count *= width;
  std::vector<Vec> disp(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    Vec y = p;
    int rem = c;
    for (int j = 0; j < d; ++j) {
      y[j] += h * ((rem % width) - radius);
      rem /= width;
    }
    normalize(a, y);
    disp[static_cast<std::size_t>(c)] = difference(m.target(), m.apply(y), y);
  }
  std::vector<Vec> out;
  out.reserve(indices.size());
  for (const auto& alpha : indices) {
    int ord = 0;
    for (int v : alpha) ord += v;
    Vec acc = Vec::Zero(m.target().dim);
    for (int c = 0; c < count; ++c) {
      double w = 1.0;
      int rem = c;
      for (int j = 0; j < d && w != 0.0; ++j) {
        int off = (rem % width) - radius;
        rem /= width;
        w *= fd_weights(alpha[static_cast<std::size_t>(j)])[static_cast<std::size_t>(off + 2)];
      }
      if (w != 0.0) acc += w * disp[static_cast<std::size_t>(c)];
    }
    out.push_back(acc / std::pow(h, ord));
  }
  return out;
}

inline std::vector<Vec> grid_points(const GridSpec& g) {
  std::vector<Vec> pts;
  for (const auto& b : g.boxes) {
    int d = static_cast<int>(b.lo.size());
    int n = std::max(1, g.points_per_axis);
    std::size_t total = 1;
    for (int j = 0; j < d; ++j) total *= static_cast<std::size_t>(n);
    for (std::size_t c = 0; c < total; ++c) {
      Vec p(d);
      std::size_t rem = c;
      for (int j = 0; j < d; ++j) {
        int i = static_cast<int>(rem % static_cast<std::size_t>(n));
        rem /= static_cast<std::size_t>(n);
        p[j] = n == 1 ? 0.5 * (b.lo[j] + b.hi[j]) : b.lo[j] + (b.hi[j] - b.lo[j]) * i / (n - 1);
      }
      pts.push_back(p);
    }
  }
  return pts;
}

}  // namespace detail

/// Estimates ||m - Id||_r on the grid. r may be an integer (no Holder term).
inline NormEstimate norm_cr(const MapExpr& m, double r, const GridSpec& grid) {
  if (!(m.source() == m.target())) throw Error(ErrorKind::AmbientMismatch, "norm of m - Id needs a self-map");
  if (!(r >= 0.0)) throw Error(ErrorKind::InvalidArgument, "regularity must be non-negative");
  const Ambient& a = m.source();
  int d = a.dim;
  int k = static_cast<int>(std::floor(r + 1e-12));
  double eps = r - k;
  if (eps < 1e-12) eps = 0.0;
  if (k > 4 || k > d + 1) throw Error(ErrorKind::InvalidArgument, "derivative order above supported stencil");

  NormEstimate est;
  est.order = k;
  est.epsilon = eps;
  est.spacing = grid.spacing();
  est.stencil_step = grid.stencil_step;
  est.per_order.assign(static_cast<std::size_t>(k + 1), 0.0);
  if (m.is_identity()) return est;

  double support = m.node().support_scale();
  if (est.spacing > support / 8.0) {
    throw Error(ErrorKind::GridTooCoarse, "grid spacing " + std::to_string(est.spacing) + " exceeds support width " +
                                              std::to_string(support) + " / 8");
  }

  std::vector<std::vector<int>> indices;
  std::vector<int> order_of;
  for (int j = 0; j <= k; ++j) {
    for (auto& alpha : detail::multi_indices(d, j)) {
      indices.push_back(alpha);
      order_of.push_back(j);
    }
  }
  std::vector<std::vector<int>> top;
  for (std::size_t i = 0; i < indices.size(); ++i)
    if (order_of[i] == k) top.push_back(indices[i]);

  int radius = k >= 3 ? 2 : 1;
  double h = grid.stencil_step;
  double h3 = grid.holder_distance;
  double margin = radius * h * std::sqrt(static_cast<double>(d)) + (eps > 0.0 ? 2.0 * h3 + radius * h * std::sqrt(d) : 0.0);

  std::vector<Vec> pts = detail::grid_points(grid);
  std::vector<std::vector<double>> sup_local(pts.size(), std::vector<double>(static_cast<std::size_t>(k + 1), 0.0));
  std::vector<double> holder_local(pts.size(), 0.0);
  std::vector<char> used(pts.size(), 0);

  parallel_for(pts.size(), [&](std::size_t i) {
    const Vec& p = pts[i];
    if (!contains(a, p, margin)) return;
    used[i] = 1;
    auto ders = detail::displacement_derivatives(m.node(), p, h, indices, radius);
    for (std::size_t t = 0; t < indices.size(); ++t) {
      auto& s = sup_local[i][static_cast<std::size_t>(order_of[t])];
      s = std::max(s, sup_norm(ders[t]));
    }
    if (eps > 0.0) {
      std::mt19937_64 rng(grid.seed ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
      std::normal_distribution<double> gauss;
      std::uniform_real_distribution<double> unif(h3, 2.0 * h3);
      Vec dir(d);
      for (int j = 0; j < d; ++j) dir[j] = gauss(rng);
      dir.normalize();
      double dist = unif(rng);
      Vec p2 = p + dist * dir;
      normalize(a, p2);
      auto top_here = detail::displacement_derivatives(m.node(), p, h, top, radius);
      auto top_there = detail::displacement_derivatives(m.node(), p2, h, top, radius);
      for (std::size_t t = 0; t < top.size(); ++t) {
        double qv = sup_norm(Vec(top_here[t] - top_there[t])) / std::pow(dist, eps);
        holder_local[i] = std::max(holder_local[i], qv);
      }
    }
  });

  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!used[i]) {
      ++est.points_skipped;
      continue;
    }
    ++est.points_used;
    for (int j = 0; j <= k; ++j)
      est.per_order[static_cast<std::size_t>(j)] = std::max(est.per_order[static_cast<std::size_t>(j)], sup_local[i][static_cast<std::size_t>(j)]);
    est.holder_part = std::max(est.holder_part, holder_local[i]);
  }
  for (double v : est.per_order) est.sup_part = std::max(est.sup_part, v);
  est.value = est.sup_part + est.holder_part;
  return est;
}

/// Uniform sample of an ambient.
template <class Rng>
Vec sample_point(const Ambient& a, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec x(a.dim);
  if (a.kind == AmbientKind::Ball) {
    do {
      for (int j = 0; j < a.dim; ++j) x[j] = 2.0 * u(rng) - 1.0;
    } while (x.norm() > 1.0);
    return x;
  }
  for (int j = 0; j < a.dim; ++j) x[j] = a.lo(j) + (a.hi(j) - a.lo(j)) * u(rng);
  normalize(a, x);
  return x;
}

/// max |det Dm(p) - 1| over seeded uniform samples of the source ambient.
inline double volume_defect(const MapExpr& m, int samples, std::uint64_t seed,
                            double step = kDefaultJacobianStep) {
  if (samples < 100) throw Error(ErrorKind::InvalidArgument, "volume_defect needs at least 100 samples");
  std::mt19937_64 rng(seed);
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) pts.push_back(sample_point(m.source(), rng));
  std::vector<double> defect(pts.size(), 0.0);
  parallel_for(pts.size(), [&](std::size_t i) {
    defect[i] = std::abs(m.node().jacobian(pts[i], step).determinant() - 1.0);
  });
  double worst = 0.0;
  for (double v : defect) worst = std::max(worst, v);
  return worst;
}

/// Same as volume_defect but over caller-supplied points.
inline double volume_defect_at(const MapExpr& m, const std::vector<Vec>& pts, double step = kDefaultJacobianStep) {
  double worst = 0.0;
  for (const auto& p : pts) worst = std::max(worst, std::abs(m.node().jacobian(p, step).determinant() - 1.0));
  return worst;
}

}  // namespace renorm
