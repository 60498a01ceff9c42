#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "renorm/ambient_chart.hpp"
#include "renorm/fragmentation.hpp"
#include "renorm/map_expr.hpp"
#include "renorm/norm.hpp"
#include "renorm/parallel.hpp"
#include "renorm/spatial_hash.hpp"
#include "renorm/tower.hpp"

namespace renorm {

// ---------------------------------------------------------------------------
// Parameters

struct RealizationParams {
  int d = 2;
  double eps = 0.01;
  double delta = 0.1;
  std::int64_t A = 32;
  int q = 4;
  double c1 = 0.5;
  double c2 = 0.5;
  double C_hat = 0.0;   // fragmentation constant
  double C1_hat = 0.0;  // tower constant, ||T - Id|| ~ C1 q^{r^4} / A
  bool scaling_study = false;

  double r() const { return d + eps; }
  double rho() const { return 1.0 / (4.0 * static_cast<double>(A)); }

  TowerParams tower() const {
    TowerParams t;
    t.d = d;
    t.A = A;
    t.q = q;
    t.r = r();
    t.scaling_study = scaling_study;
    return t;
  }
  std::int64_t N() const { return tower().N(); }
  std::int64_t M() const { return N() / 2; }
};

inline json to_json(const RealizationParams& p) {
  return {{"d", p.d},         {"eps", p.eps},       {"delta", p.delta}, {"A", p.A},
          {"q", p.q},         {"r", p.r()},         {"c1", p.c1},       {"c2", p.c2},
          {"C_hat", p.C_hat}, {"C1_hat", p.C1_hat}, {"M", p.M()},       {"scaling_study", p.scaling_study}};
}

/// Bounds on q for a given A: lower = C A^eps / (c1 delta) and
/// upper = (c2 delta A / C1)^{1/r^4}. Zero constants make a side vacuous.
struct QWindow {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

struct SelectionOptions {
  double c1 = 0.5;
  double c2 = 0.5;
  std::int64_t ceiling = std::numeric_limits<std::int64_t>::max();
};

struct ParameterChoice {
  std::int64_t A = 0;
  int q = 0;
  QWindow window;
};

/// Where the window first admits an integer: the smallest q* above the lower
/// bound at the crossing, and the A* at which the upper bound reaches it.
struct BudgetEstimate {
  double log10_A_star = 0.0;
  std::int64_t q_star = 0;
};

namespace detail {

inline void check_selection_inputs(int d, double eps, double delta, double C, double C1) {
  if (d < 2 || d > kMaxDim) throw Error(ErrorKind::InvalidArgument, "d must lie in [2, 4]");
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
  double bound = 1.0 / std::pow(d + eps, 4.0);
  if (!(eps < bound)) {
    std::ostringstream os;
    os << "eps = " << eps << " violates eps < 1/(d+eps)^4 = " << bound;
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
  if (!(delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be positive");
  if (!(C >= 0.0) || !(C1 >= 0.0)) throw Error(ErrorKind::InvalidArgument, "measured constants must be non-negative");
}

// natural logs of the window ends at log A = L
inline double log_lower(double L, double eps, double delta, double C, double c1) {
  return std::log(C / (c1 * delta)) + eps * L;
}
inline double log_upper(double L, double r4, double delta, double C1, double c2) {
  return (std::log(c2 * delta / C1) + L) / r4;
}

}  // namespace detail

inline QWindow q_window(int d, double eps, double delta, double C, double C1, double A, const SelectionOptions& o = {}) {
  double r4 = std::pow(d + eps, 4.0);
  QWindow w;
  if (C > 0.0) w.lower = std::exp(detail::log_lower(std::log(A), eps, delta, C, o.c1));
  if (C1 > 0.0) w.upper = std::exp(detail::log_upper(std::log(A), r4, delta, C1, o.c2));
  return w;
}

inline BudgetEstimate budget_threshold(int d, double eps, double delta, double C, double C1, const SelectionOptions& o = {}) {
  detail::check_selection_inputs(d, eps, delta, C, C1);
  BudgetEstimate b;
  if (C == 0.0 || C1 == 0.0) {
    b.q_star = 2;
    b.log10_A_star = std::log10(2.5);
    return b;
  }
  double r4 = std::pow(d + eps, 4.0);
  // log upper - log lower is increasing in L because eps < 1/r^4
  auto gap = [&](double L) { return detail::log_upper(L, r4, delta, C1, o.c2) - detail::log_lower(L, eps, delta, C, o.c1); };
  double lo = 0.0, hi = 1.0;
  while (gap(hi) < 0.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (gap(mid) < 0.0 ? lo : hi) = mid;
  }
  double q = std::max(2.0, std::floor(std::exp(detail::log_lower(hi, eps, delta, C, o.c1))) + 1.0);
  for (;; q += 1.0) {
    // smallest L with upper(L) > q, then confirm lower(L) < q there
    double L = r4 * std::log(q) - std::log(o.c2 * delta / C1);
    if (detail::log_lower(L, eps, delta, C, o.c1) < std::log(q)) {
      b.q_star = static_cast<std::int64_t>(q);
      b.log10_A_star = L / std::log(10.0);
      return b;
    }
  }
}

/// Smallest A = 2^k (then smallest q) with an integer q strictly inside the
/// window, q >= 2 and 4A >= 5q.
inline ParameterChoice select_parameters(int d, double eps, double delta, double C, double C1,
                                         const SelectionOptions& o = {}) {
  detail::check_selection_inputs(d, eps, delta, C, C1);
  for (int k = 1; k < 63; ++k) {
    std::int64_t A = std::int64_t{1} << k;
    if (A > o.ceiling) break;
    QWindow w = q_window(d, eps, delta, C, C1, static_cast<double>(A), o);
    double q = std::max(2.0, std::floor(w.lower) + 1.0);
    if (!(q < w.upper) || 4.0 * static_cast<double>(A) < 5.0 * q) continue;
    return {A, static_cast<int>(q), w};
  }
  BudgetEstimate b = budget_threshold(d, eps, delta, C, C1, o);
  std::ostringstream os;
  os << "no A <= " << o.ceiling << " admits q in (C A^eps/(c1 delta), (c2 delta A/C1)^(1/r^4)); need A* ~ 10^"
     << b.log10_A_star << " with q* = " << b.q_star;
  throw Error(ErrorKind::InfeasibleBudget, os.str());
}

// ---------------------------------------------------------------------------
// Rigid motions in ambient coordinates

struct RigidMotion {
  Mat orth;
  Vec shift;

  static RigidMotion identity(int d) { return {renorm::identity(d), Vec::Zero(d)}; }
  Vec apply(const Vec& x) const { return orth * x + shift; }
  RigidMotion inverse() const {
    Mat ot = orth.transpose();
    return {ot, Vec(-(ot * shift))};
  }
  /// this o other
  RigidMotion after(const RigidMotion& other) const { return {orth * other.orth, Vec(orth * other.shift + shift)}; }
};

/// Disjoint discs of a common radius, with a spatial hash for lookup.
class DiscIndex {
 public:
  DiscIndex(Ambient a, std::vector<Vec> centres, double radius)
      : a_(a), centres_(std::move(centres)), radius_(radius), hash_(a, 2.0 * radius) {
    for (std::size_t i = 0; i < centres_.size(); ++i) hash_.insert(i, centres_[i]);
  }

  /// Index of the disc containing x (open disc), if any.
  std::optional<std::size_t> find(const Vec& x) const {
    std::optional<std::size_t> hit;
    hash_.for_each_near(x, [&](std::size_t i) {
      if (!hit && distance(a_, x, centres_[i]) < radius_) hit = i;
    });
    return hit;
  }

  const Ambient& ambient() const { return a_; }
  const std::vector<Vec>& centres() const { return centres_; }
  double radius() const { return radius_; }

 private:
  Ambient a_;
  std::vector<Vec> centres_;
  double radius_;
  SpatialHash hash_;
};

/// p -> h_i^{-1} o g_i o h_i (p) on the disc B_i, identity off the discs.
/// h_i is a similarity of scale 1/radius onto the unit ball.
class PiecewiseOnBallsNode final : public MapNode {
 public:
  struct Piece {
    NodePtr chart;  // h_i : ambient -> Ball(d)
    NodePtr inner;  // g_i on Ball(d)
  };

  PiecewiseOnBallsNode(Ambient a, std::vector<Vec> centres, double radius, std::vector<Piece> pieces)
      : MapNode(a, a), index_(std::make_shared<const DiscIndex>(a, std::move(centres), radius)), pieces_(std::move(pieces)) {
    if (pieces_.size() != index_->centres().size()) throw Error(ErrorKind::InvalidArgument, "one piece per disc");
    for (const auto& p : pieces_) {
      if (!(p.chart->source() == a) || !(p.inner->source() == p.chart->target()) || !(p.inner->target() == p.chart->target())) {
        throw Error(ErrorKind::AmbientMismatch, "piece does not fit " + a.name());
      }
      local_.push_back(std::make_shared<ComposeNode>(std::vector<NodePtr>{inverse_of(p.chart), p.inner, p.chart}));
    }
  }

  std::string kind() const override { return "PiecewiseOnBalls"; }
  const DiscIndex& index() const { return *index_; }
  const std::vector<Piece>& pieces() const { return pieces_; }

  Vec apply(const Vec& x) const override {
    auto i = index_->find(x);
    return i ? local_[*i]->apply(x) : x;
  }
  Mat jacobian(const Vec& x, double step) const override {
    auto i = index_->find(x);
    return i ? local_[*i]->jacobian(x, step) : identity(source().dim);
  }
  NodePtr inverse() const override {
    std::vector<Piece> inv;
    for (const auto& p : pieces_) inv.push_back({p.chart, inverse_of(p.inner)});
    return std::make_shared<PiecewiseOnBallsNode>(source(), index_->centres(), index_->radius(), std::move(inv));
  }
  json to_json() const override {
    json j = header();
    j["radius"] = index_->radius();
    j["pieces"] = json::array();
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      j["pieces"].push_back({{"centre", renorm::to_json(index_->centres()[i])},
                             {"chart", pieces_[i].chart->to_json()},
                             {"inner", pieces_[i].inner->to_json()}});
    }
    return j;
  }
  double support_scale() const override {
    double s = kInfiniteScale;
    for (const auto& p : pieces_) s = std::min(s, p.inner->support_scale());
    return std::min(s, 2.0) * index_->radius();
  }

 private:
  std::shared_ptr<const DiscIndex> index_;
  std::vector<Piece> pieces_;
  std::vector<NodePtr> local_;
};

/// h(p) = (O^T (p (-) centre)) / radius, a similarity onto the unit ball.
inline NodePtr disc_similarity(const Ambient& a, const Vec& centre, const Mat& orth, double radius) {
  int d = a.dim;
  return std::make_shared<SimilarityNode>(a, Ambient::ball(d), 1.0 / radius, Mat(orth.transpose()), centre, Vec::Zero(d));
}

namespace detail {

/// Checks g = Id on the shell {rho_cut <= |u| <= 1}.
inline void check_piece_support(const MapNode& g, double rho_cut, std::size_t i) {
  int d = g.source().dim;
  std::mt19937_64 rng(977 + i);
  std::normal_distribution<double> gauss;
  for (int s = 0; s < 64; ++s) {
    Vec dir(d);
    for (int j = 0; j < d; ++j) dir[j] = gauss(rng);
    dir.normalize();
    for (double rad : {rho_cut, 0.5 * (1.0 + rho_cut), 1.0}) {
      Vec u = rad * dir;
      double moved = (g.apply(u) - u).norm();
      if (moved > 1e-12) {
        std::ostringstream os;
        os << "factor " << i << " moves |u| = " << rad << " by " << moved << " (cutoff radius " << rho_cut << ")";
        throw Error(ErrorKind::SupportViolation, os.str());
      }
    }
  }
}

}  // namespace detail

/// Piecewise map with g_i on disc i; Identity if every g_i is.
inline MapExpr piecewise_on_balls(const Ambient& a, const std::vector<Vec>& centres, double radius,
                                  const std::vector<NodePtr>& charts, const std::vector<MapExpr>& inner,
                                  double rho_cut = 0.9) {
  if (charts.size() != centres.size() || inner.size() != centres.size()) {
    throw Error(ErrorKind::InvalidArgument, "piecewise map needs one chart and one factor per disc");
  }
  bool trivial = true;
  std::vector<PiecewiseOnBallsNode::Piece> pieces;
  for (std::size_t i = 0; i < centres.size(); ++i) {
    if (!inner[i].is_identity()) {
      trivial = false;
      detail::check_piece_support(inner[i].node(), rho_cut, i);
    }
    pieces.push_back({charts[i], inner[i].ptr()});
  }
  if (trivial) return identity_map(a);
  return MapExpr(std::make_shared<PiecewiseOnBallsNode>(a, centres, radius, std::move(pieces)));
}

// ---------------------------------------------------------------------------
// Assembly

struct RealizationArtifact {
  RealizationParams params;
  AmbientChart chart;
  TowerSpec tower;
  FragmentationResult frag;
  std::vector<RigidMotion> isometries;  // T^{n_i} on B in ambient coordinates, i < M
  std::vector<NodePtr> similarities;    // h_i = h_0 o Iso_i^{-1}
  MapExpr T;
  MapExpr Fbar;
  MapExpr F;
  double rho_cut = 0.9;

  Ambient ambient() const { return chart.ambient(); }
  std::int64_t M() const { return tower.M(); }
  /// Centre of B_i = T^{n_i} B in the ambient.
  const Vec& disc_centre(std::size_t i) const { return tower.centres[static_cast<std::size_t>(tower.times[i])]; }
};

/// Iso_i in ambient coordinates. The chart is a translation on the rigid
/// part, so the centres fix the shift.
inline std::vector<RigidMotion> ambient_isometries(const TowerSpec& t, const AmbientChart& chart) {
  std::vector<RigidMotion> out;
  const Vec& c0 = t.centres.front();
  for (std::size_t i = 0; i < t.isometries.size(); ++i) {
    const auto& iso = t.isometries[i];
    if (chart.mode == AmbientChart::Mode::FatTorus) {
      out.push_back({iso.orth_double(), iso.shift_double()});
    } else {
      Mat o = iso.orth_double();
      out.push_back({o, Vec(t.centres[static_cast<std::size_t>(t.times[i])] - o * c0)});
    }
  }
  return out;
}

/// h_i(p) = 4A O_i^T (p - c_i), with O_i the orthogonal part of Iso_i.
inline std::vector<NodePtr> build_similarities(const TowerSpec& t, const std::vector<RigidMotion>& isos, const Ambient& a) {
  std::vector<NodePtr> out;
  double rho = to_double(t.rho);
  for (std::size_t i = 0; i < isos.size(); ++i) {
    out.push_back(disc_similarity(a, t.centres[static_cast<std::size_t>(t.times[i])], isos[i].orth, rho));
  }
  return out;
}

/// F-bar = h_i^{-1} f_i h_i on B_i, identity elsewhere.
inline MapExpr assemble_Fbar(const FragmentationResult& frag, const TowerSpec& t, const std::vector<NodePtr>& sims,
                             const Ambient& a, double rho_cut = 0.9) {
  if (static_cast<std::int64_t>(frag.factors.size()) != t.M() || sims.size() != frag.factors.size()) {
    throw Error(ErrorKind::InvalidArgument, "fragmentation has " + std::to_string(frag.factors.size()) +
                                                " factors, tower has " + std::to_string(t.M()) + " isometric times");
  }
  std::vector<Vec> centres;
  for (std::int64_t i = 0; i < t.M(); ++i) centres.push_back(t.centres[static_cast<std::size_t>(t.times[static_cast<std::size_t>(i)])]);
  return piecewise_on_balls(a, centres, to_double(t.rho), sims, frag.factors, rho_cut);
}

inline MapExpr assemble_F(const MapExpr& T, const MapExpr& Fbar) { return compose(T, Fbar); }

struct BuildOptions {
  bool measure_factors = false;  // per-factor norms and C-hat
  GridSpec factor_grid;          // empty: default_factor_grid
  double rho_cut = 0.9;
};

/// Tower, fragments, similarities and F = T o F-bar for one parameter set.
inline RealizationArtifact build_realization(const RealizationParams& p, const AmbientChart& chart,
                                             const IsotopyGenerator& gen, const BuildOptions& o = {}) {
  if (gen.dim() != p.d) throw Error(ErrorKind::AmbientMismatch, "generator dimension differs from d");
  RealizationArtifact art;
  art.params = p;
  art.chart = chart;
  art.rho_cut = o.rho_cut;
  TowerParams tp = p.tower();
  art.T = build_T(tp, chart);
  art.tower = enumerate_tower(tp, chart);
  art.frag = fragment(gen, static_cast<int>(art.tower.M()), p.r(), o.factor_grid, o.measure_factors);
  if (o.measure_factors) art.params.C_hat = art.frag.c_hat;
  art.isometries = ambient_isometries(art.tower, chart);
  art.similarities = build_similarities(art.tower, art.isometries, chart.ambient());
  art.Fbar = assemble_Fbar(art.frag, art.tower, art.similarities, chart.ambient(), o.rho_cut);
  art.F = assemble_F(art.T, art.Fbar);
  return art;
}

// ---------------------------------------------------------------------------
// Verification

struct ReturnMapReport {
  std::size_t points = 0;
  double max_deviation = 0.0;       // vs f_{M-1} o ... o f_0
  double mean_deviation = 0.0;
  double max_deviation_flow = 0.0;  // vs psi_1 integrated in one go
  double intermediate_max = 0.0;    // h_i F^{n_i} h_0^{-1} vs f_{i-1} o ... o f_0
  double centre_max = 0.0;          // T^n(c_0) vs recorded centres
  double coherence_shift = 0.0;     // chained similarities vs recorded, in anchors
  bool coherence_orth_exact = true;
};

inline json to_json(const ReturnMapReport& r) {
  return {{"points", r.points},
          {"max_deviation", r.max_deviation},
          {"mean_deviation", r.mean_deviation},
          {"max_deviation_flow", r.max_deviation_flow},
          {"intermediate_max", r.intermediate_max},
          {"centre_max", r.centre_max},
          {"coherence_shift", r.coherence_shift},
          {"coherence_orth_exact", r.coherence_orth_exact}};
}

/// 10^d grid on [-0.7, 0.7]^d, inside the unit ball.
inline GridSpec default_return_grid(int d) {
  return GridSpec::uniform(Box{Vec::Constant(d, -0.7), Vec::Constant(d, 0.7)}, 10);
}

namespace detail {

/// Steps one orbit of F = T o F-bar and checks it meets B_i exactly at n_i.
/// visit[n] is i when n = n_i, -1 otherwise. Returns h_0-coordinates of the
/// points at the visit times (before F-bar acts) plus the final point.
inline std::vector<Vec> follow_orbit(const MapExpr& T, const MapExpr& Fbar, const DiscIndex& discs,
                                     const std::vector<std::int64_t>& visit, const std::vector<NodePtr>& sims, Vec p) {
  std::vector<Vec> at_visits;
  for (std::size_t n = 0; n < visit.size(); ++n) {
    auto hit = discs.find(p);
    std::int64_t expect = visit[n];
    if ((expect < 0 && hit) || (expect >= 0 && (!hit || static_cast<std::int64_t>(*hit) != expect))) {
      std::ostringstream os;
      os << "orbit at step " << n << " is in disc " << (hit ? std::to_string(*hit) : "none") << ", expected "
         << (expect < 0 ? std::string("none") : std::to_string(expect));
      throw Error(ErrorKind::OrbitEscape, os.str());
    }
    if (expect >= 0) at_visits.push_back(sims[static_cast<std::size_t>(expect)]->apply(p));
    p = T.node().apply(Fbar.node().apply(p));
  }
  if (!discs.find(p) || *discs.find(p) != 0) throw Error(ErrorKind::OrbitEscape, "orbit does not return to B");
  at_visits.push_back(sims.front()->apply(p));
  return at_visits;
}

}  // namespace detail

/// h_0 o F^{n_M} o h_0^{-1} against f on the grid (points outside the unit
/// ball are skipped), with intermediate and bookkeeping checks.
inline ReturnMapReport return_map(const RealizationArtifact& art, const GridSpec& grid, int intermediate_points = 10) {
  const Ambient a = art.ambient();
  int d = a.dim;
  std::int64_t N = art.tower.N;
  std::int64_t M = art.M();
  ReturnMapReport rep;

  std::vector<Vec> centres;
  for (std::int64_t i = 0; i < M; ++i) centres.push_back(art.disc_centre(static_cast<std::size_t>(i)));
  DiscIndex discs(a, centres, to_double(art.tower.rho));
  std::vector<std::int64_t> visit(static_cast<std::size_t>(N), -1);
  for (std::int64_t i = 0; i < M; ++i) visit[static_cast<std::size_t>(art.tower.times[static_cast<std::size_t>(i)])] = i;

  std::vector<Vec> us;
  for (const auto& u : detail::grid_points(grid))
    if (u.size() == d && u.norm() < 1.0) us.push_back(u);
  rep.points = us.size();
  NodePtr h0_inv = inverse_of(art.similarities.front());
  MapExpr psi1 = art.frag.generator ? flow(*art.frag.generator, 1.0) : identity_map(Ambient::ball(d));

  std::vector<double> dev(us.size(), 0.0), dev_flow(us.size(), 0.0), inter(us.size(), 0.0);
  parallel_for(us.size(), [&](std::size_t k) {
    const Vec& u = us[k];
    auto visits = detail::follow_orbit(art.T, art.Fbar, discs, visit, art.similarities, h0_inv->apply(u));
    // oracle: the factors applied one after another
    Vec w = u;
    bool check_inter = static_cast<int>(k) < intermediate_points;
    for (std::int64_t i = 0; i < M; ++i) {
      if (check_inter) inter[k] = std::max(inter[k], (visits[static_cast<std::size_t>(i)] - w).norm());
      w = art.frag.factors[static_cast<std::size_t>(i)].node().apply(w);
    }
    dev[k] = (visits.back() - w).norm();
    dev_flow[k] = (visits.back() - psi1.node().apply(u)).norm();
  });
  for (std::size_t k = 0; k < us.size(); ++k) {
    rep.max_deviation = std::max(rep.max_deviation, dev[k]);
    rep.mean_deviation += dev[k] / static_cast<double>(us.size());
    rep.max_deviation_flow = std::max(rep.max_deviation_flow, dev_flow[k]);
    rep.intermediate_max = std::max(rep.intermediate_max, inter[k]);
  }

  // centres along the T-orbit of c_0
  Vec c = art.tower.centres.front();
  for (std::int64_t n = 0; n < N; ++n) {
    rep.centre_max = std::max(rep.centre_max, distance(a, c, art.tower.centres[static_cast<std::size_t>(n)]));
    c = art.T.node().apply(c);
  }
  rep.centre_max = std::max(rep.centre_max, distance(a, c, art.tower.centres.front()));

  // h_{i+1} = h_i o S_i^{-1}, S_i = Iso_{i+1} o Iso_i^{-1}, Iso_M = Id
  const auto& isos = art.isometries;
  RigidMotion id = RigidMotion::identity(d);
  Vec anchor = art.tower.centres.front();
  Mat orth = Mat(static_cast<const SimilarityNode&>(*art.similarities.front()).orth());
  for (std::int64_t i = 0; i < M; ++i) {
    const RigidMotion& next = i + 1 < M ? isos[static_cast<std::size_t>(i + 1)] : id;
    RigidMotion step = next.after(isos[static_cast<std::size_t>(i)].inverse());
    Vec moved = step.apply(anchor);
    normalize(a, moved);
    anchor = moved;
    orth = (orth * step.orth.transpose()).eval();
    const auto& h = static_cast<const SimilarityNode&>(*art.similarities[static_cast<std::size_t>((i + 1) % M)]);
    rep.coherence_shift = std::max(rep.coherence_shift, distance(a, anchor, h.anchor()));
    if (!(orth == h.orth())) rep.coherence_orth_exact = false;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Norms on the discs

/// Boxes of side 2 rho around every stride-th disc of F-bar (and the last).
inline GridSpec disc_grid(const std::vector<Vec>& centres, double rho, std::size_t stride, int per_axis = 21) {
  GridSpec g;
  g.points_per_axis = per_axis;
  g.stencil_step = 1e-2 * rho;
  g.holder_distance = 5e-2 * rho;
  stride = std::max<std::size_t>(1, stride);
  for (std::size_t i = 0; i < centres.size(); i += stride) {
    g.boxes.push_back(Box{Vec(centres[i].array() - rho), Vec(centres[i].array() + rho)});
  }
  if (!centres.empty() && (centres.size() - 1) % stride != 0) {
    g.boxes.push_back(Box{Vec(centres.back().array() - rho), Vec(centres.back().array() + rho)});
  }
  return g;
}

inline GridSpec fbar_grid(const RealizationArtifact& art, std::size_t stride = 1, int per_axis = 21) {
  std::vector<Vec> centres;
  for (std::int64_t i = 0; i < art.M(); ++i) centres.push_back(art.disc_centre(static_cast<std::size_t>(i)));
  return disc_grid(centres, to_double(art.tower.rho), stride, per_axis);
}

/// Grid for ||T - Id||: the lowest 1/q of F at 561^2 points (T commutes with
/// the y-shift by 1/q, so one block row carries the sup).
inline GridSpec t_norm_grid(int q) {
  GridSpec g = GridSpec::uniform(Box{Vec::Zero(2), vec({1.0, 1.0 / q})}, 561);
  g.stencil_step = 1e-5;
  return g;
}

// ---------------------------------------------------------------------------
// Torus baseline: F = S^{1/A} o F-bar on T^n, n = d - 1, with the discs
// B_i = S^{i/A} B, i < A^n, and S^t the translation by t (1, 1/A, ...).

struct NrtArtifact {
  int d = 3;
  std::int64_t A = 16;
  std::int64_t M = 0;
  double rho = 0.0;
  std::vector<Vec> centres;
  std::vector<NodePtr> similarities;
  MapExpr S;
  MapExpr Fbar;
  MapExpr F;
  FragmentationResult frag;
};

struct NrtReport {
  std::int64_t A = 0;
  std::int64_t M = 0;
  double perturbation_norm = 0.0;  // ||S^{-1/A} o F - Id||_{C^1, grid}
  double full_norm = 0.0;          // ||F - Id||_{C^1, grid}
  double scaled = 0.0;             // perturbation_norm * A^{d-1}
  ReturnMapReport ret;
};

inline json to_json(const NrtReport& r) {
  return {{"A", r.A}, {"M", r.M}, {"perturbation_norm", r.perturbation_norm}, {"full_norm", r.full_norm},
          {"scaled", r.scaled}, {"return_map", to_json(r.ret)}};
}

inline NrtArtifact build_nrt_baseline(int d, std::int64_t A, const FragmentationResult& frag, double rho_cut = 0.9) {
  int n = d - 1;
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "torus baseline needs d >= 3");
  if (A < 2) throw Error(ErrorKind::InvalidArgument, "A must be >= 2");
  std::int64_t M = 1;
  for (int j = 0; j < n; ++j) M *= A;
  if (static_cast<std::int64_t>(frag.factors.size()) != M) {
    throw Error(ErrorKind::InvalidArgument, "baseline needs A^(d-1) = " + std::to_string(M) + " factors");
  }
  if (!frag.factors.empty() && frag.factors.front().source().dim != n) {
    throw Error(ErrorKind::AmbientMismatch, "factors must act on the unit ball of dimension d - 1");
  }
  Ambient tor = Ambient::torus(n);
  NrtArtifact art;
  art.d = d;
  art.A = A;
  art.M = M;
  art.rho = 1.0 / (4.0 * static_cast<double>(A));
  art.frag = frag;
  std::vector<Rational> step(static_cast<std::size_t>(n));
  Rational s(1, A);
  for (int j = 0; j < n; ++j) {
    step[static_cast<std::size_t>(j)] = s;
    s /= A;
  }
  std::vector<Rational> c(static_cast<std::size_t>(n), Rational(0));
  for (std::int64_t i = 0; i < M; ++i) {
    art.centres.push_back(to_vec(c));
    for (int j = 0; j < n; ++j) c[static_cast<std::size_t>(j)] = wrap(c[static_cast<std::size_t>(j)] + step[static_cast<std::size_t>(j)], 1);
    art.similarities.push_back(disc_similarity(tor, art.centres.back(), identity(n), art.rho));
  }
  for (const auto& v : c)
    if (v != Rational(0)) throw Error(ErrorKind::TowerOverlap, "torus translation does not return after A^(d-1) steps");
  art.S = translation(tor, to_vec(step));
  art.Fbar = piecewise_on_balls(tor, art.centres, art.rho, art.similarities, frag.factors, rho_cut);
  art.F = compose(art.S, art.Fbar);
  return art;
}

/// Norms and return map of the baseline; norms on every stride-th disc.
inline NrtReport verify_nrt(const NrtArtifact& art, const GridSpec& ret_grid, std::size_t stride = 1) {
  NrtReport rep;
  rep.A = art.A;
  rep.M = art.M;
  int n = art.d - 1;
  GridSpec g = disc_grid(art.centres, art.rho, stride);
  if (!art.Fbar.is_identity()) {
    rep.perturbation_norm = norm_cr(art.Fbar, 1.0, g).value;
    rep.full_norm = norm_cr(art.F, 1.0, g).value;
  } else {
    rep.full_norm = norm_cr(art.F, 1.0, g).value;
  }
  rep.scaled = rep.perturbation_norm * std::pow(static_cast<double>(art.A), art.d - 1);

  Ambient tor = Ambient::torus(n);
  DiscIndex discs(tor, art.centres, art.rho);
  std::vector<std::int64_t> visit(static_cast<std::size_t>(art.M));
  for (std::int64_t i = 0; i < art.M; ++i) visit[static_cast<std::size_t>(i)] = i;
  std::vector<Vec> us;
  for (const auto& u : detail::grid_points(ret_grid))
    if (u.size() == n && u.norm() < 1.0) us.push_back(u);
  rep.ret.points = us.size();
  NodePtr h0_inv = inverse_of(art.similarities.front());
  std::vector<double> dev(us.size(), 0.0), inter(us.size(), 0.0);
  parallel_for(us.size(), [&](std::size_t k) {
    auto visits = detail::follow_orbit(art.S, art.Fbar, discs, visit, art.similarities, h0_inv->apply(us[k]));
    Vec w = us[k];
    for (std::int64_t i = 0; i < art.M; ++i) {
      inter[k] = std::max(inter[k], (visits[static_cast<std::size_t>(i)] - w).norm());
      w = art.frag.factors[static_cast<std::size_t>(i)].node().apply(w);
    }
    dev[k] = (visits.back() - w).norm();
  });
  for (std::size_t k = 0; k < us.size(); ++k) {
    rep.ret.max_deviation = std::max(rep.ret.max_deviation, dev[k]);
    rep.ret.mean_deviation += dev[k] / static_cast<double>(us.size());
    rep.ret.intermediate_max = std::max(rep.ret.intermediate_max, inter[k]);
  }
  return rep;
}

}  // namespace renorm
