// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "renorm/presets.hpp"
#include "renorm/realization.hpp"

using namespace renorm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// classical RK4 on the time-dependent field, fixed step
Vec rk4_time_one(const IsotopyGenerator& g, Vec x, int steps = 2048) {
  double h = 1.0 / steps;
  for (int i = 0; i < steps; ++i) {
    double t = i * h;
    Vec k1 = g.field(t, x);
    Vec k2 = g.field(t + h / 2, Vec(x + h / 2 * k1));
    Vec k3 = g.field(t + h / 2, Vec(x + h / 2 * k2));
    Vec k4 = g.field(t + h, Vec(x + h * k3));
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

// periodic distance; period <= 0 marks an interval coordinate
double pdist(const Vec& a, const Vec& b, const std::vector<double>& period) {
  double s = 0;
  for (int j = 0; j < a.size(); ++j) {
    double d = std::abs(a[j] - b[j]);
    double P = period[static_cast<std::size_t>(j)];
    if (P > 0) {
      d = std::fmod(d, P);
      d = std::min(d, P - d);
    }
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<Vec> square_grid(double half, int n) {
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pts.push_back(vec({-half + 2 * half * i / (n - 1), -half + 2 * half * j / (n - 1)}));
  return pts;
}

std::vector<Vec> disc_points(const Vec& c, double rho, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec> out;
  while (static_cast<int>(out.size()) < n) {
    Vec v(c.size());
    for (int j = 0; j < c.size(); ++j) v[j] = u(rng);
    if (v.norm() < 0.95) out.push_back(Vec(c + rho * v));
  }
  return out;
}

// Richardson-extrapolated central differences of m.apply, differences taken
// in the target ambient
Mat richardson_jacobian(const MapExpr& m, const Vec& x, double h) {
  auto central = [&](double s) {
    Mat J(m.target().dim, x.size());
    for (int j = 0; j < x.size(); ++j) {
      Vec xp = x, xm = x;
      xp[j] += s;
      xm[j] -= s;
      J.col(j) = difference(m.target(), m.node().apply(xp), m.node().apply(xm)) / (2 * s);
    }
    return J;
  };
  return Mat((4.0 * central(h / 2) - central(h)) / 3.0);
}

RealizationParams desk(std::int64_t A = 32, int q = 4, int d = 2) {
  RealizationParams p;
  p.d = d;
  p.A = A;
  p.q = q;
  p.scaling_study = true;
  return p;
}

// ---------------------------------------------------------------------------

void exact_realization() {
  auto t0 = Clock::now();
  auto gen = presets::sample(2);
  auto art = build_realization(desk(), AmbientChart::fat_torus(2), gen);
  const auto& factors = art.frag.factors;
  NodePtr h0 = art.similarities.front();
  NodePtr h0_inv = inverse_of(h0);
  std::int64_t nM = art.tower.times.back();
  double worst = 0.0, worst_rk = 0.0;
  for (const auto& u : square_grid(0.7, 10)) {
    Vec x = h0_inv->apply(u);
    for (std::int64_t n = 0; n < nM; ++n) x = art.F.node().apply(x);
    Vec got = h0->apply(x);
    Vec want = u;
    for (const auto& f : factors) want = f.node().apply(want);
    worst = std::max(worst, (got - want).norm());
    worst_rk = std::max(worst_rk, (want - rk4_time_one(gen, u)).norm());
  }
  double secs = seconds_since(t0);
  bool ok = factors.size() == 64 && nM == 128 && worst <= 1e-6 && secs <= 60.0;
  report(1, "exact realization", ok,
         fmt("M = %zu, n_M = %lld, max |h0 F^n_M h0^-1 - f_63..f_0| = %.3g (bound 1e-6) on 10x10 grid, "
             "chain vs RK4 time-one %.3g, %.1f s (bound 60 s)",
             factors.size(), static_cast<long long>(nM), worst, worst_rk, secs));
}

void funny_tower() {
  auto p = desk().tower();
  auto tw = enumerate_tower(p, AmbientChart::fat_torus(2));
  auto T = build_T(p, AmbientChart::fat_torus(2));
  double rho = p.rho();

  // brute-force disjointness in the long fat torus [0,1/q] x R/qZ
  double dmin = 1e300;
  for (std::size_t i = 0; i < tw.centres_tilde.size(); ++i)
    for (std::size_t j = i + 1; j < tw.centres_tilde.size(); ++j)
      dmin = std::min(dmin, pdist(to_vec(tw.centres_tilde[i]), to_vec(tw.centres_tilde[j]), {0.0, static_cast<double>(p.q)}));

  std::mt19937_64 rng(11);
  const std::vector<double> F_period = {0.0, 1.0};
  double ret = 0.0;
  for (const auto& x : disc_points(tw.centres[0], rho, 100, rng)) {
    Vec y = x;
    for (std::int64_t n = 0; n < tw.N; ++n) y = T.node().apply(y);
    ret = std::max(ret, pdist(x, y, F_period));
  }

  // rigidity of T^n on B from pairwise distances of a point cloud
  std::vector<Vec> cloud = {tw.centres[0]};
  for (int k = 0; k < 8; ++k) {
    double a = 2 * M_PI * k / 8;
    cloud.push_back(Vec(tw.centres[0] + 0.9 * rho * vec({std::cos(a), std::sin(a)})));
    cloud.push_back(Vec(tw.centres[0] + 0.45 * rho * vec({std::cos(a + 0.3), std::sin(a + 0.3)})));
  }
  std::vector<double> d0;
  for (std::size_t a = 0; a < cloud.size(); ++a)
    for (std::size_t b = a + 1; b < cloud.size(); ++b) d0.push_back(pdist(cloud[a], cloud[b], F_period));
  std::int64_t rigid = 0, flagged = 0, flagged_not_rigid = 0;
  std::vector<Vec> cur = cloud;
  for (std::int64_t n = 0; n < tw.N; ++n) {
    double distortion = 0.0;
    std::size_t k = 0;
    for (std::size_t a = 0; a < cur.size(); ++a)
      for (std::size_t b = a + 1; b < cur.size(); ++b) distortion = std::max(distortion, std::abs(pdist(cur[a], cur[b], F_period) - d0[k++]));
    bool is_rigid = distortion <= 1e-12;
    bool flag = tw.isometric[static_cast<std::size_t>(n)] != 0;
    rigid += is_rigid;
    flagged += flag;
    flagged_not_rigid += flag && !is_rigid;
    for (auto& x : cur) x = T.node().apply(x);
  }
  double gamma = static_cast<double>(flagged) / static_cast<double>(tw.N);
  bool ok = tw.N == 128 && dmin > 2 * rho && ret <= 1e-9 && gamma >= 0.5 && std::abs(gamma - 0.8) <= 0.1 && flagged_not_rigid == 0;
  report(2, "funny tower", ok,
         fmt("N = %lld, min centre distance %.6g > 2 rho = %.6g, T^N displacement %.3g (bound 1e-9), "
             "isometric fraction %.4f (>= 0.5, 0.8 +/- 0.1), flagged times not rigid %lld, rigid by distance test %lld/%lld",
             static_cast<long long>(tw.N), dmin, 2 * rho, ret, gamma, static_cast<long long>(flagged_not_rigid),
             static_cast<long long>(rigid), static_cast<long long>(tw.N)));
}

void fragmentation() {
  auto gen = presets::sample(2);
  std::vector<double> chat, chat_oracle;
  double tele = 0.0;
  std::vector<Vec> tgrid;
  for (const auto& x : square_grid(0.95, 20))
    if (x.norm() < 1.0) tgrid.push_back(x);
  std::vector<Vec> want;
  for (const auto& x : tgrid) want.push_back(rk4_time_one(gen, x));
  std::vector<Vec> cgrid;
  for (const auto& x : square_grid(0.95, 21))
    if (x.norm() < 0.999) cgrid.push_back(x);
  for (int M : {16, 64, 256}) {
    auto res = fragment(gen, M, 1.0);
    chat.push_back(res.c_hat);
    // oracle: sup |f - x| + sup |Df - I| by central differences
    double worst = 0.0;
    for (const auto& f : res.factors) {
      double c0 = 0.0, c1 = 0.0;
      for (const auto& x : cgrid) {
        c0 = std::max(c0, (f.node().apply(x) - x).norm());
        Mat J(2, 2);
        for (int j = 0; j < 2; ++j) {
          Vec xp = x, xm = x;
          xp[j] += 1e-5;
          xm[j] -= 1e-5;
          J.col(j) = (f.node().apply(xp) - f.node().apply(xm)) / 2e-5;
        }
        c1 = std::max(c1, (J - identity(2)).cwiseAbs().maxCoeff());
      }
      worst = std::max(worst, std::max(c0, c1));
    }
    chat_oracle.push_back(M * worst);
    auto comp = res.composite();
    for (std::size_t k = 0; k < tgrid.size(); ++k) tele = std::max(tele, (comp.node().apply(tgrid[k]) - want[k]).norm());
  }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  bool ok = spread(chat) <= 2.0 && spread(chat_oracle) <= 2.0 && tele <= 1e-8;
  report(3, "fragmentation", ok,
         fmt("C-hat(16, 64, 256) = %.4g, %.4g, %.4g (spread %.3f, bound 2), oracle C1 %.4g, %.4g, %.4g (spread %.3f), "
             "telescoping vs RK4 %.3g (bound 1e-8)",
             chat[0], chat[1], chat[2], spread(chat), chat_oracle[0], chat_oracle[1], chat_oracle[2], spread(chat_oracle), tele));
}

void norm_scalings() {
  // T: halves when A doubles
  std::vector<double> tn;
  for (std::int64_t A : {32, 64}) tn.push_back(norm_cr(build_T(desk(A, 4).tower(), AmbientChart::fat_torus(2)), 1.0, t_norm_grid(4)).value);
  double t_ratio = tn[0] / tn[1];

  // F-bar: norm * A^{d-1} * q constant
  auto gen = presets::sample(2);
  std::vector<double> fb, fb_alt;
  for (auto [A, q] : std::vector<std::pair<std::int64_t, int>>{{16, 2}, {32, 2}, {32, 4}}) {
    auto art = build_realization(desk(A, q), AmbientChart::fat_torus(2), gen);
    auto stride = static_cast<std::size_t>(std::max<std::int64_t>(1, art.M() / 16));
    double n = norm_cr(art.Fbar, 1.0, fbar_grid(art, stride)).value;
    fb.push_back(n * static_cast<double>(A) * q);
    fb_alt.push_back(n * q / static_cast<double>(A));
  }

  // torus baseline: perturbation * A^2 constant
  std::vector<double> nrt;
  double nrt_ret = 0.0;
  for (std::int64_t A : {16, 32, 64}) {
    auto frag = fragment(gen, static_cast<int>(A * A), 1.0, GridSpec{}, false);
    auto art = build_nrt_baseline(3, A, frag);
    auto rep = verify_nrt(art, default_return_grid(2), static_cast<std::size_t>(std::max<std::int64_t>(1, art.M / 16)));
    nrt.push_back(rep.scaled);
    nrt_ret = std::max(nrt_ret, rep.ret.max_deviation);
  }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  bool ok = std::abs(t_ratio / 2.0 - 1.0) <= 0.2 && spread(fb) <= 2.0 && spread(nrt) <= 2.0 && nrt_ret <= 1e-6;
  report(4, "norm scalings", ok,
         fmt("|T-Id| A=32: %.4g, A=64: %.4g, ratio %.3f (2 +/- 20%%); |Fbar-Id| * A q over (16,2),(32,2),(32,4) = "
             "%.3f, %.3f, %.3f (spread %.3f, bound 2; against A^(d-1)/q spread %.2f); torus baseline * A^2 at A = 16, 32, 64 = "
             "%.3f, %.3f, %.3f (spread %.3f), baseline return %.2g",
             tn[0], tn[1], t_ratio, fb[0], fb[1], fb[2], spread(fb), spread(fb_alt), nrt[0], nrt[1], nrt[2], spread(nrt), nrt_ret));
}

void conservation() {
  auto art = build_realization(desk(), AmbientChart::fat_torus(2), presets::sample(2));
  MapExpr hq = build_snake(art.params.tower());
  double vT = volume_defect(art.T, 10000, 21), vFbar = volume_defect(art.Fbar, 10000, 22);
  double vF = volume_defect(art.F, 10000, 23), vH = volume_defect(hq, 10000, 24);

  // independent determinant on points inside the discs, where F-bar acts; T
  // has slopes of several hundred, so the step has to be small
  std::mt19937_64 rng(5);
  double rho = art.params.rho(), oracle = 0.0;
  for (std::int64_t i = 0; i < art.M(); i += 4) {
    for (const auto& x : disc_points(art.disc_centre(static_cast<std::size_t>(i)), rho, 25, rng)) {
      oracle = std::max(oracle, std::abs(richardson_jacobian(art.F, x, 1e-6).determinant() - 1.0));
      oracle = std::max(oracle, std::abs(richardson_jacobian(art.Fbar, x, 1e-6).determinant() - 1.0));
    }
  }
  for (int k = 0; k < 400; ++k) {
    Vec x = sample_point(Ambient::fat_torus(2), rng);
    oracle = std::max(oracle, std::abs(richardson_jacobian(art.T, x, 1e-6).determinant() - 1.0));
    oracle = std::max(oracle, std::abs(richardson_jacobian(hq, x, 1e-6).determinant() - 1.0));
  }
  bool ok = std::max({vT, vFbar, vF, vH, oracle}) <= 1e-5;
  report(5, "conservation", ok,
         fmt("volume defect at 1e4 samples: T %.3g, Fbar %.3g, F %.3g, h_q %.3g; Richardson determinant on "
             "disc and uniform samples %.3g (bound 1e-5)",
             vT, vFbar, vF, vH, oracle));
}

void parameter_gate() {
  bool rejects = false;
  try {
    select_parameters(2, 0.06, 0.1, 1.0, 1.0);  // 1/(2.06)^4 = 0.0555
  } catch (const Error& e) {
    rejects = e.kind() == ErrorKind::InvalidArgument;
  }
  bool infeasible = false;
  std::string msg;
  try {
    select_parameters(2, 0.01, 0.1, 1.0, 1.0);
  } catch (const Error& e) {
    infeasible = e.kind() == ErrorKind::InfeasibleBudget;
    msg = e.what();
  }
  // oracle: first A on a log scale where an integer fits strictly between the bounds
  double eps = 0.01, delta = 0.1, r4 = std::pow(2.01, 4);
  double log10_star = -1, q_star = 0;
  for (double L = 0.0; L < 80.0; L += 1e-4) {
    double lo = std::pow(10.0, eps * L) / (0.5 * delta);
    double hi = std::pow(0.5 * delta * std::pow(10.0, L), 1.0 / r4);
    if (std::floor(lo) + 1.0 < hi) {
      log10_star = L;
      q_star = std::floor(lo) + 1.0;
      break;
    }
  }
  auto b = budget_threshold(2, 0.01, 0.1, 1.0, 1.0);
  bool symbolic = msg.find("A* ~ 10^") != std::string::npos && msg.find("q* = ") != std::string::npos;
  bool ok = rejects && infeasible && symbolic && std::abs(b.log10_A_star - log10_star) <= 0.01 &&
            std::abs(static_cast<double>(b.q_star) - q_star) <= 1.0;
  report(6, "parameter gate", ok,
         fmt("eps = 0.06 rejected: %s; eps = 0.01, delta = 0.1: %s, reported log10 A* = %.4f, q* = %lld; "
             "scan oracle log10 A* = %.4f, q* = %.0f",
             rejects ? "yes" : "no", infeasible ? "InfeasibleBudget" : "not infeasible", b.log10_A_star,
             static_cast<long long>(b.q_star), log10_star, q_star));
}

// Random composites on the fat torus and the ball: towers T(A, q), vertical
// translations, disc-supported flows and charted towers.
MapExpr random_composite(std::mt19937_64& rng, bool& in_ball) {
  std::uniform_int_distribution<int> pick(0, 3), count(2, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rand_gen = [&]() {
    return IsotopyGenerator(2, {presets::monomial({2, 0}, 0.3 * u(rng) - 0.15, 0.1 * u(rng)), presets::monomial({1, 1}, 0.2 * u(rng) - 0.1),
                                presets::monomial({0, 3}, 0.2 * u(rng) - 0.1)},
                            RadialCutoff{0.5, 0.9});
  };
  auto tower_params = [&]() {
    TowerParams p;
    p.A = std::int64_t{1} << (3 + static_cast<int>(u(rng) * 3));
    p.q = 2 + static_cast<int>(u(rng) * 3);
    p.scaling_study = true;
    return p;
  };
  in_ball = u(rng) < 0.25;
  std::vector<MapExpr> chain;
  int n = count(rng);
  if (in_ball) {
    int q = 2 + static_cast<int>(u(rng) * 3);
    for (int k = 0; k < n; ++k) {
      if (k % 2 == 0) {
        TowerParams p = tower_params();
        p.q = q;
        p.A = std::max<std::int64_t>(p.A, 8);
        chain.push_back(build_T(p, AmbientChart::ball(2, q)));
      } else {
        chain.push_back(flow(rand_gen(), 0.2 + 0.8 * u(rng)));
      }
    }
    return compose(chain);
  }
  Ambient F = Ambient::fat_torus(2);
  for (int k = 0; k < n; ++k) {
    switch (pick(rng)) {
      case 0: chain.push_back(build_T(tower_params(), AmbientChart::fat_torus(2))); break;
      case 1: chain.push_back(translation(F, vec({0.0, u(rng)}))); break;
      case 2: chain.push_back(build_T(tower_params(), AmbientChart::fat_torus(2))); break;
      default: {
        double rad = 0.05 + 0.05 * u(rng);
        std::vector<Vec> centres = {vec({0.25, u(rng)}), vec({0.75, u(rng)})};
        std::vector<NodePtr> sims;
        std::vector<MapExpr> inner;
        for (const auto& c : centres) {
          double a = 2 * M_PI * u(rng);
          Mat O(2, 2);
          O << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
          sims.push_back(disc_similarity(F, c, O, rad));
          inner.push_back(flow(rand_gen(), 1.0));
        }
        chain.push_back(piecewise_on_balls(F, centres, rad, sims, inner));
      }
    }
  }
  return compose(chain);
}

void property_suites() {
  std::mt19937_64 rng(2024);
  double round_trip = 0.0, chain_rel = 0.0, fd_rel = 0.0, vol = 0.0;
  int ball = 0;
  for (int k = 0; k < 100; ++k) {
    bool in_ball = false;
    MapExpr m = random_composite(rng, in_ball);
    ball += in_ball;
    MapExpr inv = invert(m);
    std::vector<MapExpr> parts;
    if (m.node().kind() == "Compose") {
      for (const auto& c : static_cast<const ComposeNode&>(m.node()).children()) parts.push_back(MapExpr(c));
    } else {
      parts.push_back(m);
    }
    for (int i = 0; i < 100; ++i) {
      Vec x = sample_point(m.source(), rng);
      if (in_ball) x *= 0.98;
      round_trip = std::max(round_trip, distance(m.source(), inv.node().apply(m.node().apply(x)), x));
      Mat J = m.node().jacobian(x, kDefaultJacobianStep);
      // chain rule; children are stored outermost first
      Mat P = identity(2);
      Vec y = x;
      for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
        P = it->node().jacobian(y, kDefaultJacobianStep) * P;
        y = it->node().apply(y);
      }
      double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
      chain_rel = std::max(chain_rel, (J - P).cwiseAbs().maxCoeff() / scale);
      if (i < 10) fd_rel = std::max(fd_rel, (J - richardson_jacobian(m, x, 1e-6)).cwiseAbs().maxCoeff() / scale);
      vol = std::max(vol, std::abs(J.determinant() - 1.0));
    }
  }
  bool ok = round_trip <= 1e-9 && chain_rel <= 1e-6 && fd_rel <= 1e-6 && vol <= 1e-5;
  report(7, "map-core properties", ok,
         fmt("100 composites (%d in the ball), 100 points each: round trip %.3g (bound 1e-9), chain rule %.3g and "
             "Richardson differences %.3g relative (bound 1e-6), volume defect %.3g (bound 1e-5)",
             ball, round_trip, chain_rel, fd_rel, vol));
}

}  // namespace

int main() {
  std::vector<std::function<void()>> criteria = {exact_realization, funny_tower,    fragmentation, norm_scalings,
                                                 conservation,      parameter_gate, property_suites};
  int id = 1;
  for (auto& run : criteria) {
    try {
      run();
    } catch (const std::exception& e) {
      report(id, "criterion", false, std::string("threw: ") + e.what());
    }
    ++id;
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
