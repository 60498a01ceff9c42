#include <catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <random>

#include "renorm/realization.hpp"
#include "sample_targets.hpp"

using namespace renorm;

namespace {

RealizationParams desk(std::int64_t A = 32, int q = 4, int d = 2) {
  RealizationParams p;
  p.d = d;
  p.A = A;
  p.q = q;
  p.scaling_study = true;
  return p;
}

// window ends evaluated straight from the inequality
double lower_q(double A, double eps, double delta, double C) { return C * std::pow(A, eps) / (0.5 * delta); }
double upper_q(double A, double d, double eps, double delta, double C1) {
  return std::pow(0.5 * delta * A / C1, 1.0 / std::pow(d + eps, 4));
}

std::vector<Vec> points_in_disc(const Vec& c, double rho, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec> pts;
  while (static_cast<int>(pts.size()) < n) {
    Vec v(c.size());
    for (int j = 0; j < c.size(); ++j) v[j] = u(rng);
    if (v.norm() < 1.0) pts.push_back(Vec(c + rho * v));
  }
  return pts;
}

}  // namespace

TEST_CASE("parameter selection rejects eps at or above 1/(d+eps)^4") {
  CHECK_THROWS_WITH(select_parameters(2, 0.07, 0.1, 1, 1), Catch::Matchers::ContainsSubstring("1/(d+eps)^4"));
  CHECK_THROWS_AS(select_parameters(2, 0.0, 0.1, 1, 1), Error);
  CHECK_THROWS_AS(select_parameters(3, 0.01, 0.1, 1, 1), Error);  // 1/3.01^4 < 0.01
  CHECK_NOTHROW(q_window(2, 0.05, 0.1, 1, 1, 64.0));
}

TEST_CASE("parameter selection with vacuous constraints") {
  auto c = select_parameters(2, 0.01, 0.1, 0.0, 0.0);
  CHECK(c.A == 4);
  CHECK(c.q == 2);
}

TEST_CASE("parameter selection matches a brute-force scan") {
  double eps = 0.01, delta = 100.0;
  std::int64_t A_ref = 0;
  int q_ref = 0;
  for (int k = 1; k < 63 && A_ref == 0; ++k) {
    double A = std::ldexp(1.0, k);
    for (int q = 2; q < 10000; ++q) {
      if (q > lower_q(A, eps, delta, 1.0) && q < upper_q(A, 2, eps, delta, 1.0) && 4 * A >= 5 * q) {
        A_ref = static_cast<std::int64_t>(A);
        q_ref = q;
        break;
      }
    }
  }
  REQUIRE(A_ref > 0);
  auto c = select_parameters(2, eps, delta, 1.0, 1.0);
  CHECK(c.A == A_ref);
  CHECK(c.q == q_ref);
}

TEST_CASE("desk-scale budget is infeasible with the threshold reported") {
  int d = 2;
  double eps = 0.01, delta = 0.1;
  try {
    select_parameters(d, eps, delta, 1.0, 1.0);
    FAIL("expected InfeasibleBudget");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleBudget);
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("q* = "));
  }
  auto b = budget_threshold(d, eps, delta, 1.0, 1.0);
  INFO("log10 A* = " << b.log10_A_star << ", q* = " << b.q_star);
  double A = std::pow(10.0, b.log10_A_star);
  double q = static_cast<double>(b.q_star);
  CHECK(lower_q(A, eps, delta, 1.0) < q);
  CHECK(upper_q(A * 1.001, d, eps, delta, 1.0) > q);
  // below A* no integer fits
  double A_less = A / 1.5;
  CHECK(std::floor(lower_q(A_less, eps, delta, 1.0)) + 1.0 >= upper_q(A_less, d, eps, delta, 1.0));
  CHECK(b.log10_A_star > std::log10(9.2e18));
}

TEST_CASE("piecewise map on discs") {
  Ambient tor = Ambient::torus(2);
  double rho = 0.05;
  std::vector<Vec> centres = {vec({0.1, 0.1}), vec({0.5, 0.3}), vec({0.98, 0.7}), vec({0.3, 0.9})};
  auto gen = std::make_shared<const IsotopyGenerator>(sample::generator2());
  std::vector<NodePtr> charts;
  std::vector<MapExpr> inner;
  for (std::size_t i = 0; i < centres.size(); ++i) {
    double a = 0.5 * M_PI * static_cast<double>(i);
    Mat o(2, 2);
    o << std::round(std::cos(a)), -std::round(std::sin(a)), std::round(std::sin(a)), std::round(std::cos(a));
    charts.push_back(disc_similarity(tor, centres[i], o, rho));
    inner.push_back(flow_between(gen, 0.1 * i, 0.1 * i + 0.3, 256));
  }

  SECTION("identity factors give Identity") {
    std::vector<MapExpr> ids(centres.size(), identity_map(Ambient::ball(2)));
    CHECK(piecewise_on_balls(tor, centres, rho, charts, ids).is_identity());
  }

  SECTION("disc points follow the manual chain") {
    auto m = piecewise_on_balls(tor, centres, rho, charts, inner);
    for (std::size_t i = 0; i < centres.size(); ++i) {
      for (const auto& p : points_in_disc(centres[i], rho, 20, 3 + i)) {
        Vec want = charts[i]->inverse()->apply(inner[i](charts[i]->apply(p)));
        CHECK(distance(tor, m(p), want) <= 1e-12);
      }
    }
    // across the periodic seam of disc 2
    Vec seam = vec({0.005, 0.7});
    Vec want = charts[2]->inverse()->apply(inner[2](charts[2]->apply(seam)));
    CHECK(distance(tor, m(seam), want) <= 1e-12);
    CHECK(m(vec({0.7, 0.5})) == vec({0.7, 0.5}));
    auto minv = invert(m);
    std::mt19937_64 rng(5);
    for (int k = 0; k < 100; ++k) {
      Vec p = sample_point(tor, rng);
      CHECK(distance(tor, minv(m(p)), p) <= 1e-9);
    }
  }

  SECTION("factors without a cutoff are rejected") {
    std::vector<MapExpr> bad = inner;
    bad[1] = flow(sample::rotation(0.3), 1.0);
    CHECK_THROWS_AS(piecewise_on_balls(tor, centres, rho, charts, bad), Error);
    try {
      piecewise_on_balls(tor, centres, rho, charts, bad);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SupportViolation);
    }
  }
}

TEST_CASE("realization identity at desk scale") {
  auto t0 = std::chrono::steady_clock::now();
  auto art = build_realization(desk(), AmbientChart::fat_torus(2), sample::generator2());
  REQUIRE(art.M() == 64);
  REQUIRE(art.frag.factors.size() == 64);
  auto rep = return_map(art, default_return_grid(2));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  INFO("max " << rep.max_deviation << " flow " << rep.max_deviation_flow << " inter " << rep.intermediate_max
              << " centre " << rep.centre_max << " time " << secs);
  CHECK(rep.points == 100);
  CHECK(rep.max_deviation <= 1e-6);
  CHECK(rep.max_deviation_flow <= 1e-6);
  CHECK(rep.intermediate_max <= 1e-8);
  CHECK(rep.centre_max <= 1e-9);
  CHECK(rep.coherence_orth_exact);
  CHECK(rep.coherence_shift <= 1e-12);
  CHECK(secs <= 60.0);

  SECTION("F-bar on B_3 is h_3^{-1} f_3 h_3") {
    const auto& h3 = art.similarities[3];
    for (const auto& p : points_in_disc(art.disc_centre(3), art.params.rho(), 20, 11)) {
      Vec want = h3->inverse()->apply(art.frag.factors[3](h3->apply(p)));
      CHECK(distance(art.ambient(), art.Fbar(p), want) <= 1e-12);
    }
  }

  SECTION("similarities expand by 4A") {
    for (const auto& h : art.similarities) {
      CHECK(static_cast<const SimilarityNode&>(*h).scale() == 128.0);
    }
  }

  SECTION("volume and norm decomposition") {
    CHECK(volume_defect(art.F, 10000, 21) <= 1e-5);
    CHECK(volume_defect(art.Fbar, 10000, 22) <= 1e-5);
    std::vector<Vec> inside;
    for (std::int64_t i = 0; i < art.M(); i += 8) {
      auto pts = points_in_disc(art.disc_centre(static_cast<std::size_t>(i)), art.params.rho(), 20, 40 + i);
      inside.insert(inside.end(), pts.begin(), pts.end());
    }
    CHECK(volume_defect_at(art.F, inside) <= 1e-5);
    CHECK(volume_defect_at(art.Fbar, inside) <= 1e-5);

    GridSpec g = fbar_grid(art, 4);
    double nF = norm_cr(art.F, 0.0, g).value;
    double nFbar = norm_cr(art.Fbar, 0.0, g).value;
    double nT = norm_cr(art.T, 0.0, g).value;
    INFO("C0: F " << nF << " Fbar " << nFbar << " T " << nT);
    CHECK(nF <= nFbar + nT + 1e-12);
  }
}

TEST_CASE("identity target realizes as F = T") {
  auto art = build_realization(desk(16, 2), AmbientChart::fat_torus(2), sample::zero(2));
  CHECK(art.Fbar.is_identity());
  CHECK(art.F.to_json() == art.T.to_json());
  auto rep = return_map(art, default_return_grid(2));
  CHECK(rep.max_deviation <= static_cast<double>(art.tower.N) * 1e-12);
}

TEST_CASE("tampered centre makes the orbit escape") {
  auto art = build_realization(desk(16, 2), AmbientChart::fat_torus(2), sample::generator2());
  art.tower.centres[static_cast<std::size_t>(art.tower.times[3])][0] += 0.3;
  try {
    return_map(art, default_return_grid(2));
    FAIL("expected OrbitEscape");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OrbitEscape);
  }
}

TEST_CASE("realization in the ball ambient") {
  auto art = build_realization(desk(), AmbientChart::ball(2, 4), sample::generator2());
  CHECK(art.ambient() == Ambient::ball(2));
  auto rep = return_map(art, default_return_grid(2));
  INFO("max " << rep.max_deviation << " centre " << rep.centre_max);
  CHECK(rep.max_deviation <= 1e-6);
  CHECK(rep.intermediate_max <= 1e-8);
  CHECK(rep.coherence_orth_exact);
  CHECK(rep.coherence_shift <= 1e-12);
}

TEST_CASE("realization for d = 3") {
  auto art = build_realization(desk(8, 4, 3), AmbientChart::fat_torus(3), sample::generator3());
  CHECK(art.M() == 128);
  auto rep = return_map(art, GridSpec::uniform(Box{Vec::Constant(3, -0.5), Vec::Constant(3, 0.5)}, 4));
  INFO("max " << rep.max_deviation);
  CHECK(rep.max_deviation <= 1e-6);
  CHECK(rep.intermediate_max <= 1e-8);
}

TEST_CASE("F-bar norm tracks A^{1-d}/q") {
  std::vector<std::pair<std::int64_t, int>> runs = {{16, 2}, {32, 2}, {32, 4}};
  std::vector<double> scaled;
  for (auto [A, q] : runs) {
    auto art = build_realization(desk(A, q), AmbientChart::fat_torus(2), sample::generator2());
    double n = norm_cr(art.Fbar, 1.0, fbar_grid(art, 4)).value;
    scaled.push_back(n * q * static_cast<double>(A));
    INFO("A " << A << " q " << q << " norm " << n);
  }
  double lo = *std::min_element(scaled.begin(), scaled.end());
  double hi = *std::max_element(scaled.begin(), scaled.end());
  INFO("norm * q * A: " << scaled[0] << " " << scaled[1] << " " << scaled[2]);
  CHECK(hi / lo <= 2.0);
}

TEST_CASE("torus baseline") {
  SECTION("identity target gives the translation") {
    auto frag = fragment(sample::zero(2), 256, 1.0, GridSpec{}, false);
    auto art = build_nrt_baseline(3, 16, frag);
    CHECK(art.Fbar.is_identity());
    auto rep = verify_nrt(art, default_return_grid(2), 16);
    CHECK(rep.ret.max_deviation <= 256 * 1e-12);
    CHECK(rep.perturbation_norm == 0.0);
  }
  SECTION("return map and norm at A = 16") {
    auto frag = fragment(sample::generator2(), 256, 1.0, GridSpec{}, false);
    auto art = build_nrt_baseline(3, 16, frag);
    CHECK(art.centres.size() == 256);
    CHECK(min_pair_distance(Ambient::torus(2), art.centres, 2 * art.rho) > 2 * art.rho);
    auto rep = verify_nrt(art, default_return_grid(2), 16);
    INFO("max " << rep.ret.max_deviation << " norm " << rep.perturbation_norm);
    CHECK(rep.ret.max_deviation <= 1e-6);
    CHECK(rep.ret.intermediate_max <= 1e-8);
    CHECK(rep.perturbation_norm > 0.0);
  }
  CHECK_THROWS_AS(build_nrt_baseline(2, 16, fragment(sample::zero(2), 16, 1.0, GridSpec{}, false)), Error);
}
