#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "renorm/map_expr.hpp"
#include "renorm/smoothstep.hpp"

namespace renorm {

/// Volume-preserving chart between a region P of the unit disc and the fat
/// torus F = [0,1] x T (d = 2).
///
/// The rectangle [0,1] x [0,a], a = 1 - 1/q, is placed rigidly as the centred
/// rectangle [-1/2,1/2] x [-a/2,a/2]. The band y in [a,1] becomes a tube
/// around a curve Gamma(s) that leaves the top edge upwards, makes two
/// clockwise half turns and enters the bottom edge upwards. In the tube
///   dy = W(s) ds,   eta - k eta^2 / 2 = W(s) (x - 1/2),
/// where eta is the offset along the right normal and k the curvature, so
/// the Jacobian is exactly 1. P has area a + 1/q = 1.
class BallChartGeometry {
 public:
  explicit BallChartGeometry(int q, int order = 4) : q_(q), step_(order) {
    if (q < 2) throw Error(ErrorKind::ConstructionFailure, "ball chart needs q >= 2");
    a_ = 1.0 - 1.0 / q;
    s1_ = 0.4 / q;
    build_turn_table();
    turn_len_ = kLegOffset / turn_x_unit_;
    D_ = turn_len_ * turn_x_unit_;
    half_ = s1_ + turn_len_ + a_ / 2 + s1_;
    L_ = 2.0 * half_;
    W0_ = (1.0 / q - s1_) / (L_ - s1_);
    if (!(W0_ > 0.0)) throw Error(ErrorKind::ConstructionFailure, "tube budget exhausted");
    for (int i = 0; i <= kScan; ++i) {
      double s = s1_ + (L_ - 2 * s1_) * i / kScan;
      scan_.push_back({s, gamma(s)});
    }
    // the tube must stay inside the unit disc
    for (const auto& [s, g] : scan_) {
      double reach = std::hypot(g[0], g[1]) + 0.5 * W0_ / (1.0 - 0.5 * W0_ * std::abs(kappa(s)));
      if (reach >= 1.0) throw Error(ErrorKind::ConstructionFailure, "tube leaves the unit disc");
    }
  }

  int q() const { return q_; }
  double a() const { return a_; }
  double tube_width() const { return W0_; }
  double length() const { return L_; }

  /// Heading angle of Gamma at arclength s.
  double theta(double s) const {
    if (s > half_) return M_PI - theta(L_ - s);
    if (s <= s1_) return M_PI / 2;
    if (s <= s1_ + turn_len_) return M_PI / 2 - M_PI * turn_fraction((s - s1_) / turn_len_);
    return -M_PI / 2;
  }

  /// Curvature towards the right normal (positive on clockwise turns).
  double kappa(double s) const {
    if (s > half_) return kappa(L_ - s);
    if (s <= s1_ || s >= s1_ + turn_len_) return 0.0;
    return M_PI * turn_rate((s - s1_) / turn_len_) / turn_len_;
  }

  std::array<double, 2> gamma(double s) const {
    if (s > half_) {
      auto g = gamma(L_ - s);
      return {g[0], -g[1]};
    }
    if (s <= s1_) return {0.0, a_ / 2 + s};
    if (s <= s1_ + turn_len_) {
      auto t = turn_offset((s - s1_) / turn_len_);
      return {turn_len_ * t[0], a_ / 2 + s1_ + turn_len_ * t[1]};
    }
    return {D_, a_ / 2 + s1_ - (s - s1_ - turn_len_)};
  }

  double width(double s) const {
    double e = std::min(s, L_ - s);
    if (e >= s1_) return W0_;
    return 1.0 - (1.0 - W0_) * step_(e / s1_);
  }

  /// y - a as a function of arclength.
  double band_coordinate(double s) const {
    double head = s1_ * (1.0 + W0_) / 2;
    if (s <= s1_) return s - (1.0 - W0_) * s1_ * step_.integral(s / s1_);
    if (s >= L_ - s1_) return 1.0 / q_ - band_coordinate(L_ - s);
    return head + W0_ * (s - s1_);
  }

  double arclength_of(double t) const {
    double head = s1_ * (1.0 + W0_) / 2;
    if (t >= 1.0 / q_ - head) return L_ - arclength_of(1.0 / q_ - t);
    if (t >= head) return s1_ + (t - head) / W0_;
    double s = t;
    for (int it = 0; it < 60; ++it) {
      double f = band_coordinate(s) - t;
      s -= f / width(s);
      if (std::abs(f) < 1e-16) break;
    }
    return s;
  }

  /// F -> P.
  Vec forward(const Vec& f) const {
    double x = f[0], y = f[1];
    Vec p(2);
    if (y <= a_) {
      p << x - 0.5, y - a_ / 2;
      return p;
    }
    double s = arclength_of(y - a_);
    double w = width(s), k = kappa(s), xi = x - 0.5;
    double eta = 2.0 * w * xi / (1.0 + std::sqrt(1.0 - 2.0 * k * w * xi));
    auto g = gamma(s);
    double th = theta(s);
    p << g[0] + eta * std::sin(th), g[1] - eta * std::cos(th);
    return p;
  }

  /// P -> F, or nothing outside P.
  std::optional<Vec> backward(const Vec& p) const {
    double X = p[0], Y = p[1];
    Vec f(2);
    if (std::abs(X) <= 0.5 && std::abs(Y) <= a_ / 2) {
      f << X + 0.5, Y + a_ / 2;
      return f;
    }
    if (Y > a_ / 2 && Y <= a_ / 2 + s1_) {
      double s = Y - a_ / 2;
      double w = width(s);
      if (std::abs(X) <= 0.5 * w) {
        f << X / w + 0.5, a_ + band_coordinate(s);
        return f;
      }
    }
    if (Y < -a_ / 2 && Y >= -a_ / 2 - s1_) {
      double s = L_ - (-Y - a_ / 2);
      double w = width(s);
      if (std::abs(X) <= 0.5 * w) {
        f << X / w + 0.5, wrap(a_ + band_coordinate(s), 1.0);
        return f;
      }
    }
    // thin part: project onto Gamma restricted to [s1, L - s1]
    double best = std::numeric_limits<double>::infinity(), s = s1_;
    for (const auto& [sv, g] : scan_) {
      double dist = std::hypot(X - g[0], Y - g[1]);
      if (dist < best) {
        best = dist;
        s = sv;
      }
    }
    if (best > W0_) return std::nullopt;
    for (int it = 0; it < 40; ++it) {
      auto g = gamma(s);
      double th = theta(s);
      double fx = (X - g[0]) * std::cos(th) + (Y - g[1]) * std::sin(th);
      double eta = (X - g[0]) * std::sin(th) - (Y - g[1]) * std::cos(th);
      double ds = fx / (1.0 - kappa(s) * eta);
      s = std::clamp(s + ds, s1_, L_ - s1_);
      if (std::abs(ds) < 1e-15) break;
    }
    auto g = gamma(s);
    double th = theta(s);
    double along = (X - g[0]) * std::cos(th) + (Y - g[1]) * std::sin(th);
    if (std::abs(along) > 1e-12) return std::nullopt;
    double eta = (X - g[0]) * std::sin(th) - (Y - g[1]) * std::cos(th);
    double k = kappa(s);
    double xi = (eta - 0.5 * k * eta * eta) / width(s);
    if (std::abs(xi) > 0.5 || k * eta >= 1.0) return std::nullopt;
    f << xi + 0.5, wrap(a_ + band_coordinate(s), 1.0);
    return f;
  }

  bool contains(const Vec& p) const { return backward(p).has_value(); }

  /// True when the disc of radius r about c (in F) lies in the rigid rectangle.
  bool rigid_disc(const Vec& c, double r) const {
    double y = wrap(c[1], 1.0);
    return c[0] - r >= 0.0 && c[0] + r <= 1.0 && y - r >= 0.0 && y + r <= a_;
  }

 private:
  static constexpr double kLegOffset = 0.6;  // x of the descending leg
  static constexpr int kTable = 512;
  static constexpr int kScan = 4096;
  static constexpr double kRamp = 0.2;  // curvature ramps on [0, kRamp] and [1 - kRamp, 1]

  // Fraction of the half turn done at u: the curvature is constant between
  // smoothstep ramps.
  double turn_rate(double u) const {
    return step_(u / kRamp) * step_((1.0 - u) / kRamp) / (1.0 - kRamp);
  }
  double turn_fraction(double u) const {
    double acc;
    if (u <= kRamp) acc = kRamp * step_.integral(u / kRamp);
    else if (u <= 1.0 - kRamp) acc = kRamp / 2 + (u - kRamp);
    else acc = (1.0 - kRamp) - kRamp * step_.integral((1.0 - u) / kRamp);
    return acc / (1.0 - kRamp);
  }

  // int_0^u (sin(pi S), cos(pi S)) dv by 8-point Gauss-Legendre on [lo, u]
  std::array<double, 2> gl_segment(double lo, double hi) const {
    static const double xs[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
    static const double ws[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    std::array<double, 2> acc{0.0, 0.0};
    for (int i = 0; i < 4; ++i) {
      for (double sg : {-1.0, 1.0}) {
        double v = mid + sg * half * xs[i];
        double ang = M_PI * turn_fraction(v);
        acc[0] += ws[i] * std::sin(ang);
        acc[1] += ws[i] * std::cos(ang);
      }
    }
    return {acc[0] * half, acc[1] * half};
  }

  void build_turn_table() {
    table_.assign(kTable + 1, {0.0, 0.0});
    for (int i = 0; i < kTable; ++i) {
      auto seg = gl_segment(static_cast<double>(i) / kTable, static_cast<double>(i + 1) / kTable);
      table_[i + 1] = {table_[i][0] + seg[0], table_[i][1] + seg[1]};
    }
    turn_x_unit_ = table_[kTable][0];
  }

  std::array<double, 2> turn_offset(double u) const {
    int i = std::clamp(static_cast<int>(u * kTable), 0, kTable - 1);
    auto seg = gl_segment(static_cast<double>(i) / kTable, u);
    return {table_[i][0] + seg[0], table_[i][1] + seg[1]};
  }

  int q_;
  Smoothstep step_;
  double a_ = 0, s1_ = 0, turn_len_ = 0, D_ = 0, half_ = 0, L_ = 0, W0_ = 0, turn_x_unit_ = 0;
  std::vector<std::array<double, 2>> table_;
  std::vector<std::pair<double, std::array<double, 2>>> scan_;
};

using ChartPtr = std::shared_ptr<const BallChartGeometry>;

/// h : P -> F (source Ball(2)); points outside P raise DomainEscape.
class BallChartNode final : public MapNode {
 public:
  explicit BallChartNode(ChartPtr g) : MapNode(Ambient::ball(2), Ambient::fat_torus(2)), g_(std::move(g)) {}
  std::string kind() const override { return "BallChart"; }
  Vec apply(const Vec& p) const override {
    auto f = g_->backward(p);
    if (!f) throw Error(ErrorKind::DomainEscape, "point outside the chart region P");
    normalize(target(), *f);
    return *f;
  }
  NodePtr inverse() const override;
  json to_json() const override {
    json j = header();
    j["q"] = g_->q();
    return j;
  }
  double support_scale() const override { return g_->tube_width(); }
  const ChartPtr& geometry() const { return g_; }

 private:
  ChartPtr g_;
};

/// h^{-1} : F -> P.
class BallChartInverseNode final : public MapNode {
 public:
  explicit BallChartInverseNode(ChartPtr g) : MapNode(Ambient::fat_torus(2), Ambient::ball(2)), g_(std::move(g)) {}
  std::string kind() const override { return "BallChartInverse"; }
  Vec apply(const Vec& f) const override { return g_->forward(f); }
  NodePtr inverse() const override { return std::make_shared<BallChartNode>(g_); }
  json to_json() const override {
    json j = header();
    j["q"] = g_->q();
    return j;
  }
  double support_scale() const override { return g_->tube_width(); }
  const ChartPtr& geometry() const { return g_; }

 private:
  ChartPtr g_;
};

inline NodePtr BallChartNode::inverse() const { return std::make_shared<BallChartInverseNode>(g_); }

/// h^{-1} o inner o h on P, extended by the identity to the rest of the disc.
class ChartedNode final : public MapNode {
 public:
  ChartedNode(ChartPtr g, MapExpr inner) : MapNode(Ambient::ball(2), Ambient::ball(2)), g_(std::move(g)), inner_(std::move(inner)) {
    if (!(inner_.source() == Ambient::fat_torus(2)) || !(inner_.target() == Ambient::fat_torus(2))) {
      throw Error(ErrorKind::AmbientMismatch, "charted map must act on FatTorus(2)");
    }
  }
  std::string kind() const override { return "Charted"; }
  Vec apply(const Vec& p) const override {
    auto f = g_->backward(p);
    if (!f) return p;
    Vec img = inner_.node().apply(*f);
    if (img == *f) return p;
    return g_->forward(img);
  }
  /// Chain rule through the chart; differencing the composite directly picks
  /// up the large third derivatives of the inner map.
  Mat jacobian(const Vec& p, double step) const override {
    auto f = g_->backward(p);
    if (!f) return identity(2);
    Vec img = inner_.node().apply(*f);
    if (img == *f) return identity(2);
    try {
      Mat into = in_rigid(p) ? identity(2) : fd_jacobian(BallChartNode(g_), p, step);
      Mat back = img[1] <= g_->a() ? identity(2) : fd_jacobian(BallChartInverseNode(g_), img, step);
      return back * inner_.node().jacobian(*f, step) * into;
    } catch (const Error&) {
      return fd_jacobian(*this, p, step);  // stencil leaves P
    }
  }
  NodePtr inverse() const override { return std::make_shared<ChartedNode>(g_, MapExpr(inverse_of(inner_.ptr()))); }
  json to_json() const override {
    json j = header();
    j["q"] = g_->q();
    j["inner"] = inner_.to_json();
    return j;
  }
  double support_scale() const override { return inner_.node().support_scale() * g_->tube_width(); }
  const MapExpr& inner() const { return inner_; }
  const ChartPtr& geometry() const { return g_; }

 private:
  bool in_rigid(const Vec& p) const { return std::abs(p[0]) < 0.5 && std::abs(p[1]) < g_->a() / 2; }

  ChartPtr g_;
  MapExpr inner_;
};

/// How the construction on F is placed in the ambient: FatTorus mode works on
/// F directly (h = Id); Ball mode (d = 2) goes through BallChartGeometry.
struct AmbientChart {
  enum class Mode { FatTorus, Ball };

  Mode mode = Mode::FatTorus;
  int dim = 2;
  ChartPtr geometry;

  static AmbientChart fat_torus(int d) { return {Mode::FatTorus, d, nullptr}; }
  static AmbientChart ball(int d, int q, int order = 4) {
    if (d != 2) throw Error(ErrorKind::InvalidArgument, "Ball ambient is only built for d = 2");
    return {Mode::Ball, 2, std::make_shared<const BallChartGeometry>(q, order)};
  }

  Ambient ambient() const { return mode == Mode::FatTorus ? Ambient::fat_torus(dim) : Ambient::ball(2); }
  std::string name() const { return mode == Mode::FatTorus ? "FatTorusAmbient" : "BallAmbient"; }

  /// inner (a map of F) transported to the ambient.
  MapExpr transport(const MapExpr& inner) const {
    if (mode == Mode::FatTorus || inner.is_identity()) return mode == Mode::FatTorus ? inner : identity_map(ambient());
    return MapExpr(std::make_shared<ChartedNode>(geometry, inner));
  }

  /// Point of F in ambient coordinates.
  Vec place(const Vec& f) const { return mode == Mode::FatTorus ? f : geometry->forward(f); }

  bool rigid_disc(const Vec& c, double r) const { return mode == Mode::FatTorus || geometry->rigid_disc(c, r); }

  /// h as a map P -> F and its inverse (identities in FatTorus mode).
  MapExpr chart() const {
    return mode == Mode::FatTorus ? identity_map(ambient()) : MapExpr(std::make_shared<BallChartNode>(geometry));
  }
  MapExpr chart_inverse() const {
    return mode == Mode::FatTorus ? identity_map(ambient()) : MapExpr(std::make_shared<BallChartInverseNode>(geometry));
  }

  json to_json() const {
    json j = {{"mode", name()}, {"dim", dim}};
    if (geometry) j["q"] = geometry->q();
    return j;
  }
};

struct ChartDefects {
  double isometry_defect = 0.0;  // max |Dh - I| on the rigid rectangle
  double volume_defect = 0.0;    // max |det Dh^{-1} - 1| over F
  int samples = 0;
};

/// Sampled defects of the chart; both are 0 in FatTorus mode.
inline ChartDefects measure_chart(const AmbientChart& c, int samples = 10000, std::uint64_t seed = 1) {
  ChartDefects d;
  d.samples = samples;
  if (c.mode == AmbientChart::Mode::FatTorus) return d;
  BallChartInverseNode inv(c.geometry);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < samples; ++i) {
    Vec f(2);
    f << 0.01 + 0.98 * u(rng), u(rng);
    Mat j = inv.jacobian(f, 1e-6);
    d.volume_defect = std::max(d.volume_defect, std::abs(j.determinant() - 1.0));
    if (c.geometry->rigid_disc(f, 1e-5)) d.isometry_defect = std::max(d.isometry_defect, sup_norm(Mat(j - identity(2))));
  }
  return d;
}

}  // namespace renorm
