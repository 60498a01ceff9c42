#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "renorm/ambient_chart.hpp"
#include "renorm/map_expr.hpp"
#include "renorm/rational.hpp"
#include "renorm/smoothstep.hpp"
#include "renorm/spatial_hash.hpp"

namespace renorm {

struct TowerParams {
  int d = 2;
  std::int64_t A = 32;
  int q = 4;
  double r = 2.01;
  bool scaling_study = false;  // waives q^{r^4} < A

  double rho() const { return 1.0 / (4.0 * static_cast<double>(A)); }
  Rational rho_exact() const { return Rational(1, 4 * A); }
  std::int64_t N() const {
    std::int64_t n = q;
    for (int j = 1; j < d; ++j) n *= A;
    return n;
  }
  std::int64_t M() const { return N() / 2; }
  int smoothness() const { return static_cast<int>(std::ceil(r - 1e-12)) + 2; }

  /// log(A) - r^4 log(q); positive when the smallness condition holds.
  double smallness_margin() const { return std::log(static_cast<double>(A)) - std::pow(r, 4) * std::log(q); }

  void validate() const {
    if (d < 2 || d > kMaxDim) throw Error(ErrorKind::InvalidArgument, "d must lie in [2, 4]");
    if (q < 2) throw Error(ErrorKind::ConstructionFailure, "q must be >= 2");
    if (A < 1) throw Error(ErrorKind::ConstructionFailure, "A must be positive");
    if (!(r >= 0.0)) throw Error(ErrorKind::InvalidArgument, "r must be non-negative");
    // the base disc must sit on the plateau of phi: 1/(4A) <= 0.2/q
    if (4 * A < 5 * static_cast<std::int64_t>(q)) {
      throw Error(ErrorKind::ConstructionFailure, "need A >= 1.25 q so the tower discs fit the shear plateau");
    }
    double logN = std::log(static_cast<double>(q)) + (d - 1) * std::log(static_cast<double>(A));
    if (logN > std::log(static_cast<double>(kMaxTowerHeight))) {
      throw Error(ErrorKind::ConstructionFailure, "tower height q A^{d-1} too large to enumerate");
    }
    if (!scaling_study && !(smallness_margin() > 0.0)) {
      throw Error(ErrorKind::ConstructionFailure,
                  "q^{r^4} < A fails (set scaling_study to measure scaling laws at desk scale)");
    }
  }

  static constexpr std::int64_t kMaxTowerHeight = std::int64_t(1) << 24;
};

// ---------------------------------------------------------------------------
// phi and the shear

/// phi on [0, 1/q]: 0 up to 0.2/q, smoothstep up to the plateau 1/A on
/// [0.3/q, 0.7/q], smoothstep down to 0 at 0.8/q.
class BumpProfile final : public Profile1D {
 public:
  BumpProfile(int q, std::int64_t A, int order) : q_(q), A_(A), step_(order) {}

  double derivative(double x, int n) const override {
    double lo = 0.2 / q_, hi = 0.8 / q_, w = 0.1 / q_;
    if (x <= lo || x >= hi) return 0.0;
    double height = 1.0 / static_cast<double>(A_);
    if (x >= 0.3 / q_ && x <= 0.7 / q_) return n == 0 ? height : 0.0;
    double scale = std::pow(1.0 / w, n);
    if (x < 0.3 / q_) return height * scale * step_.derivative((x - lo) / w, n);
    return height * scale * ((n % 2) ? -1.0 : 1.0) * step_.derivative((hi - x) / w, n);
  }
  double support_lo() const override { return 0.2 / q_; }
  double support_hi() const override { return 0.8 / q_; }
  json to_json() const override { return {{"kind", "bump"}, {"q", q_}, {"A", A_}, {"order", step_.order()}}; }

  int q() const { return q_; }
  std::int64_t A() const { return A_; }
  int order() const { return step_.order(); }

 private:
  int q_;
  std::int64_t A_;
  Smoothstep step_;
};

inline std::shared_ptr<const BumpProfile> build_phi(const TowerParams& p) {
  if (p.q < 2) throw Error(ErrorKind::InvalidArgument, "q must be >= 2");
  return std::make_shared<const BumpProfile>(p.q, p.A, p.smoothness());
}

/// Grid C^k norm of phi: max over j <= k of sup |phi^{(j)}| from 5-point
/// central differences on n points of [0, 1/q].
inline double phi_norm_grid(const Profile1D& phi, int k, double q, int n = 4001) {
  double h = 1e-3 / q;
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = (1.0 / q) * i / (n - 1);
    for (int j = 0; j <= k; ++j) {
      double v;
      if (j == 0) {
        v = phi(x);
      } else {
        // nested central differences of the analytic (j-1)-th derivative
        v = (phi.derivative(x + h, j - 1) - phi.derivative(x - h, j - 1)) / (2 * h);
      }
      best = std::max(best, std::abs(v));
    }
  }
  return best;
}

/// Shear vector (0, 1, 1/(qA), ..., 1/(qA^{d-2})).
inline std::vector<Rational> shear_vector(const TowerParams& p) {
  std::vector<Rational> v(static_cast<std::size_t>(p.d), Rational(0));
  v[1] = Rational(1);
  std::int64_t den = p.q;
  for (int j = 2; j < p.d; ++j) {
    den *= p.A;
    v[static_cast<std::size_t>(j)] = Rational(1, den);
  }
  return v;
}

inline MapExpr build_shear(const TowerParams& p, std::shared_ptr<const BumpProfile> phi) {
  return MapExpr(std::make_shared<ShearNode>(Ambient::long_fat_torus(p.d, p.q), std::move(phi), 0, to_vec(shear_vector(p))));
}

// ---------------------------------------------------------------------------
// Snake chart h_q : F -> F~_q

/// Block k of F is [0,1] x [k/q, (k+1)/q]. In normalized block coordinates
/// (X, U) = (x, qy - k), h_q applies the twist g(v) = c + R(alpha(|v-c|))(v-c)
/// about c = (1/2, 1/2), with alpha = pi/2 for radius <= r1 and alpha = 0 for
/// radius >= r2, then lands at (X'/q, k + U'). On the core disc of radius r1
/// this is the exact isometry (x, y) -> ((k+1)/q - y, x + k).
class SnakeNode final : public MapNode {
 public:
  SnakeNode(int d, int q, int order, double r1 = kCoreRadius, double r2 = kOuterRadius, bool inverse = false)
      : MapNode(inverse ? Ambient::long_fat_torus(d, q) : Ambient::fat_torus(d),
                inverse ? Ambient::fat_torus(d) : Ambient::long_fat_torus(d, q)),
        q_(q), order_(order), r1_(r1), r2_(r2), inverse_(inverse), step_(order) {
    if (q < 2 || !(0.0 < r1 && r1 < r2 && r2 <= 0.5)) {
      throw Error(ErrorKind::ConstructionFailure, "snake chart needs q >= 2 and 0 < r1 < r2 <= 1/2");
    }
  }

  static constexpr double kCoreRadius = 0.40;
  static constexpr double kOuterRadius = 0.50;

  std::string kind() const override { return "Snake"; }
  int q() const { return q_; }
  double core_radius() const { return r1_; }
  double outer_radius() const { return r2_; }
  bool is_inverse() const { return inverse_; }

  Vec apply(const Vec& x) const override {
    Vec y = x;
    if (!inverse_) {
      int k = block(q_ * x[1]);
      double X = x[0], U = q_ * x[1] - k;
      twist(X, U, 1.0);
      y[0] = X / q_;
      y[1] = k + U;
    } else {
      int k = block(x[1]);
      double X = q_ * x[0], U = x[1] - k;
      twist(X, U, -1.0);
      y[0] = X;
      y[1] = (k + U) / q_;
    }
    normalize(target(), y);
    return y;
  }

  Mat jacobian(const Vec& x, double) const override {
    Mat j = identity(source().dim);
    double X, U, sgn;
    if (!inverse_) {
      int k = block(q_ * x[1]);
      X = x[0];
      U = q_ * x[1] - k;
      sgn = 1.0;
    } else {
      int k = block(x[1]);
      X = q_ * x[0];
      U = x[1] - k;
      sgn = -1.0;
    }
    Eigen::Matrix2d dg = twist_jacobian(X, U, sgn);
    Eigen::Matrix2d pre, post;
    if (!inverse_) {
      pre << 1, 0, 0, q_;
      post << 1.0 / q_, 0, 0, 1;
    } else {
      pre << q_, 0, 0, 1;
      post << 1, 0, 0, 1.0 / q_;
    }
    j.topLeftCorner(2, 2) = post * dg * pre;
    return j;
  }

  NodePtr inverse() const override {
    return std::make_shared<SnakeNode>(source().dim, q_, order_, r1_, r2_, !inverse_);
  }

  json to_json() const override {
    json j = header();
    j["q"] = q_;
    j["order"] = order_;
    j["r1"] = r1_;
    j["r2"] = r2_;
    j["inverse"] = inverse_;
    return j;
  }

  double support_scale() const override { return (r2_ - r1_) / q_; }

  /// Exact isometry of block k: F -> F~_q, (x, y, z) -> ((k+1)/q - y, x + k, z).
  static ExactIsometry core_isometry(int d, int q, std::int64_t k) {
    ExactIsometry iso = ExactIsometry::identity(d);
    iso.orth(0, 0) = 0;
    iso.orth(0, 1) = -1;
    iso.orth(1, 0) = 1;
    iso.orth(1, 1) = 0;
    iso.shift[0] = Rational(k + 1, q);
    iso.shift[1] = Rational(k);
    return iso;
  }

 private:
  int block(double t) const { return std::clamp(static_cast<int>(std::floor(t)), 0, q_ - 1); }

  double angle(double r) const { return 0.5 * M_PI * (1.0 - step_((r - r1_) / (r2_ - r1_))); }
  double angle_rate(double r) const { return -0.5 * M_PI * step_.derivative((r - r1_) / (r2_ - r1_), 1) / (r2_ - r1_); }

  void twist(double& X, double& U, double sgn) const {
    double wx = X - 0.5, wu = U - 0.5;
    double r = std::hypot(wx, wu);
    if (r >= r2_) return;
    double a = sgn * angle(r);
    double c, s;
    if (r <= r1_) {
      // exact quarter turn
      c = 0.0;
      s = sgn;
    } else {
      c = std::cos(a);
      s = std::sin(a);
    }
    X = 0.5 + c * wx - s * wu;
    U = 0.5 + s * wx + c * wu;
  }

  Eigen::Matrix2d twist_jacobian(double X, double U, double sgn) const {
    double wx = X - 0.5, wu = U - 0.5;
    double r = std::hypot(wx, wu);
    Eigen::Matrix2d out = Eigen::Matrix2d::Identity();
    if (r >= r2_) return out;
    double a = sgn * angle(r);
    Eigen::Matrix2d R;
    if (r <= r1_) {
      R << 0, -sgn, sgn, 0;
      return R;
    }
    R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    Eigen::Matrix2d J;
    J << 0, -1, 1, 0;
    Eigen::Vector2d w(wx, wu);
    double da = sgn * angle_rate(r);
    return R * (Eigen::Matrix2d::Identity() + J * w * w.transpose() * (da / r));
  }

  int q_, order_;
  double r1_, r2_;
  bool inverse_;
  Smoothstep step_;
};

inline MapExpr build_snake(const TowerParams& p) {
  if (p.q < 2) throw Error(ErrorKind::InvalidArgument, "q must be >= 2");
  return MapExpr(std::make_shared<SnakeNode>(p.d, p.q, p.smoothness()));
}

/// T = h^{-1} o h_q^{-1} o T~_phi o h_q o h.
inline MapExpr build_T(const TowerParams& p, const AmbientChart& chart) {
  if (chart.dim != p.d) throw Error(ErrorKind::AmbientMismatch, "chart dimension differs from d");
  MapExpr hq = build_snake(p);
  MapExpr shear = build_shear(p, build_phi(p));
  MapExpr on_F = compose({invert(hq), shear, hq});
  return chart.transport(on_F);
}

// ---------------------------------------------------------------------------
// Tower enumeration

struct TowerSpec {
  TowerParams params;
  std::string chart_mode = "FatTorusAmbient";
  Rational rho;
  std::int64_t N = 0;
  std::vector<Rational> base_centre;                  // in F
  std::vector<std::vector<Rational>> centres_tilde;   // T~^n centre, in F~_q, n = 0..N-1
  std::vector<Vec> centres;                           // T^n centre, in the ambient
  std::vector<char> isometric;                        // per n
  std::vector<std::int64_t> times;                    // n_0 < ... < n_{M-1} (isometric), then n_M = N
  std::vector<ExactIsometry> isometries;              // T^{n_i} on B, i < M (ambient coordinates)
  double gamma = 0.0;                                 // isometric fraction
  double min_distance = 0.0;                          // min centre distance in F~_q

  std::int64_t M() const { return static_cast<std::int64_t>(times.size()) - 1; }
};

namespace detail {

/// Disc of radius rho (in F~_q) at x~ = 1/(2q), y~ = w lies in the core disc
/// of its block, in normalized coordinates where it is an ellipse with
/// semi-axes (q rho, rho).
inline bool disc_in_core(double w, double q, double rho, double r1) {
  double k = std::floor(w);
  double e = (w - k) - 0.5;
  double a = q * rho, b = rho;
  // maximise a^2 (1 - s^2) + (e + b s)^2 over s in [-1, 1]
  auto f = [&](double s) { return a * a * (1 - s * s) + (e + b * s) * (e + b * s); };
  double best = std::max(f(-1.0), f(1.0));
  if (a > b) {
    double s = std::clamp(e * b / (a * a - b * b), -1.0, 1.0);
    best = std::max(best, f(s));
  }
  return best < r1 * r1 * (1.0 - 1e-12);
}

}  // namespace detail

/// Minimum distance between distinct centres with periodic wrap, via a
/// spatial hash on cells of size `cell`. Returns +inf for fewer than 2 centres.
inline double min_pair_distance(const Ambient& a, const std::vector<Vec>& c, double cell) {
  double best = std::numeric_limits<double>::infinity();
  if (c.size() < 2) return best;
  double extent = 0.0;
  for (int j = 0; j < a.dim; ++j) extent = std::max(extent, a.periodic(j) ? a.period(j) : a.hi(j) - a.lo(j));
  // a hash with cells of side h finds every pair closer than h; grow h until
  // the answer is below it or one cell spans the ambient
  for (;; cell *= 2.0) {
    SpatialHash grid(a, cell);
    for (std::size_t i = 0; i < c.size(); ++i) grid.insert(i, c[i]);
    for (std::size_t i = 0; i < c.size(); ++i) {
      grid.for_each_near(c[i], [&](std::size_t other) {
        if (other != i) best = std::min(best, distance(a, c[i], c[other]));
      });
    }
    if (best < cell || cell >= extent) return best;
  }
}

/// Builds the tower over B = h^{-1} h_q^{-1}(B~), B~ the disc of radius
/// 1/(4A) about (1/(2q), 1/2, 0, ...). Centres move by exact rational steps.
inline TowerSpec enumerate_tower(const TowerParams& p, const AmbientChart& chart) {
  p.validate();
  if (chart.dim != p.d) throw Error(ErrorKind::AmbientMismatch, "chart dimension differs from d");
  TowerSpec t;
  t.params = p;
  t.chart_mode = chart.name();
  t.rho = p.rho_exact();
  t.N = p.N();
  int d = p.d;
  double rho = p.rho();
  const double r1 = SnakeNode::kCoreRadius;
  Ambient ft = Ambient::long_fat_torus(d, p.q);

  std::vector<Rational> c0(static_cast<std::size_t>(d), Rational(0));
  c0[0] = Rational(1, 2 * p.q);
  c0[1] = Rational(1, 2);
  // base centre in F: core_0^{-1}(c0) = (1/2, 1/(2q), 0...)
  t.base_centre = SnakeNode::core_isometry(d, p.q, 0).inverse().apply(c0);

  std::vector<Rational> step = shear_vector(p);
  for (auto& s : step) s *= Rational(1, p.A);

  t.centres_tilde.reserve(static_cast<std::size_t>(t.N));
  std::vector<Rational> c = c0;
  for (std::int64_t n = 0; n < t.N; ++n) {
    t.centres_tilde.push_back(c);
    for (int j = 0; j < d; ++j) c[static_cast<std::size_t>(j)] += step[static_cast<std::size_t>(j)];
    c = wrap(ft, c);
  }
  // exact return after N steps
  if (c != c0) throw Error(ErrorKind::TowerOverlap, "centre does not return after N steps");

  std::vector<Vec> tilde(static_cast<std::size_t>(t.N));
  for (std::int64_t n = 0; n < t.N; ++n) tilde[static_cast<std::size_t>(n)] = to_vec(t.centres_tilde[static_cast<std::size_t>(n)]);
  t.min_distance = min_pair_distance(ft, tilde, 2.0 * rho);
  if (!(t.min_distance > 2.0 * rho)) {
    throw Error(ErrorKind::TowerOverlap, "tower discs overlap: min centre distance " + std::to_string(t.min_distance));
  }

  if (!detail::disc_in_core(0.5, p.q, rho, r1)) throw Error(ErrorKind::ConstructionFailure, "base disc leaves the snake core");
  ExactIsometry from_base = SnakeNode::core_isometry(d, p.q, 0);
  SnakeNode snake_inv(d, p.q, p.smoothness(), r1, SnakeNode::kOuterRadius, true);

  t.isometric.assign(static_cast<std::size_t>(t.N), 0);
  t.centres.resize(static_cast<std::size_t>(t.N));
  std::int64_t count = 0;
  for (std::int64_t n = 0; n < t.N; ++n) {
    const auto& ct = t.centres_tilde[static_cast<std::size_t>(n)];
    double w = to_double(ct[1]);
    std::int64_t k = static_cast<std::int64_t>(std::floor(w));
    bool core = detail::disc_in_core(w, p.q, rho, r1);
    Vec centre_F;
    ExactIsometry iso_F;
    if (core) {
      // T^n on B = core_k^{-1} o tau_n o core_0, a translation in F
      ExactIsometry tau = ExactIsometry::translation(ct);
      for (int j = 0; j < d; ++j) tau.shift[static_cast<std::size_t>(j)] -= c0[static_cast<std::size_t>(j)];
      iso_F = SnakeNode::core_isometry(d, p.q, k).inverse().after(tau).after(from_base).reduced(Ambient::fat_torus(d));
      centre_F = to_vec(iso_F.apply(t.base_centre));
    } else {
      centre_F = snake_inv.apply(to_vec(ct));
    }
    bool rigid = core && chart.rigid_disc(centre_F, rho);
    t.centres[static_cast<std::size_t>(n)] = chart.place(centre_F);
    if (rigid) {
      t.isometric[static_cast<std::size_t>(n)] = 1;
      ++count;
      if (static_cast<std::int64_t>(t.times.size()) < p.M()) {
        t.times.push_back(n);
        t.isometries.push_back(iso_F);  // the chart is a translation on the rigid part
      }
    }
  }
  t.gamma = static_cast<double>(count) / static_cast<double>(t.N);
  if (static_cast<std::int64_t>(t.times.size()) < p.M()) {
    throw Error(ErrorKind::ConstructionFailure, "fewer than N/2 isometric times (gamma = " + std::to_string(t.gamma) + ")");
  }
  t.times.push_back(t.N);
  return t;
}

inline json to_json(const TowerSpec& t) {
  json j;
  j["d"] = t.params.d;
  j["A"] = t.params.A;
  j["q"] = t.params.q;
  j["r"] = t.params.r;
  j["scaling_study"] = t.params.scaling_study;
  j["chart"] = t.chart_mode;
  j["rho"] = to_json(t.rho);
  j["N"] = t.N;
  j["gamma"] = t.gamma;
  j["min_distance"] = t.min_distance;
  json bc = json::array();
  for (const auto& v : t.base_centre) bc.push_back(to_json(v));
  j["base_centre"] = bc;
  json ct = json::array();
  for (const auto& c : t.centres_tilde) {
    json e = json::array();
    for (const auto& v : c) e.push_back(to_json(v));
    ct.push_back(e);
  }
  j["centres_tilde"] = ct;
  json cs = json::array();
  for (const auto& c : t.centres) cs.push_back(to_json(c));
  j["centres"] = cs;
  j["isometric"] = t.isometric;
  j["times"] = t.times;
  json isos = json::array();
  for (const auto& iso : t.isometries) isos.push_back(to_json(iso));
  j["isometries"] = isos;
  return j;
}

inline TowerSpec tower_from_json(const json& j) {
  TowerSpec t;
  t.params.d = j.at("d").get<int>();
  t.params.A = j.at("A").get<std::int64_t>();
  t.params.q = j.at("q").get<int>();
  t.params.r = j.at("r").get<double>();
  t.params.scaling_study = j.at("scaling_study").get<bool>();
  t.chart_mode = j.at("chart").get<std::string>();
  t.rho = rational_from_json(j.at("rho"));
  t.N = j.at("N").get<std::int64_t>();
  t.gamma = j.at("gamma").get<double>();
  t.min_distance = j.at("min_distance").get<double>();
  for (const auto& v : j.at("base_centre")) t.base_centre.push_back(rational_from_json(v));
  for (const auto& c : j.at("centres_tilde")) {
    std::vector<Rational> e;
    for (const auto& v : c) e.push_back(rational_from_json(v));
    t.centres_tilde.push_back(std::move(e));
  }
  for (const auto& c : j.at("centres")) t.centres.push_back(vec_from_json(c));
  t.isometric = j.at("isometric").get<std::vector<char>>();
  t.times = j.at("times").get<std::vector<std::int64_t>>();
  for (const auto& iso : j.at("isometries")) t.isometries.push_back(isometry_from_json(iso));
  if (static_cast<std::int64_t>(t.centres.size()) != t.N || static_cast<std::int64_t>(t.centres_tilde.size()) != t.N ||
      static_cast<std::int64_t>(t.isometric.size()) != t.N || t.times.empty() ||
      t.isometries.size() + 1 != t.times.size()) {
    throw Error(ErrorKind::InvalidArgument, "tower record is inconsistent");
  }
  return t;
}

}  // namespace renorm
