#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "renorm/config.hpp"
#include "renorm/realization.hpp"

namespace renorm {

inline constexpr int kArtifactVersion = 1;

/// Outcome of one verification check.
struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double bound = 0.0;
  std::string note;
};

inline json to_json(const Check& c) {
  json j = {{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"bound", c.bound}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

/// Realization parameters from a config: explicit (A, q) in scaling-study
/// mode, or the smallest admissible pair.
inline RealizationParams realization_params(const Config& c) {
  RealizationParams p;
  p.d = c.d;
  p.eps = c.eps;
  p.delta = c.delta;
  p.c1 = c.c1;
  p.c2 = c.c2;
  p.C_hat = c.C_hat;
  p.C1_hat = c.C1_hat;
  if (c.parameters == "select") {
    SelectionOptions o;
    o.c1 = c.c1;
    o.c2 = c.c2;
    auto choice = select_parameters(c.d, c.eps, c.delta, c.C_hat, c.C1_hat, o);
    p.A = choice.A;
    p.q = choice.q;
    p.scaling_study = false;
  } else {
    p.A = c.A;
    p.q = c.q;
    p.scaling_study = true;
  }
  return p;
}

inline AmbientChart chart_for(const Config& c, int q) {
  return c.mode == RunMode::Ball ? AmbientChart::ball(2, q) : AmbientChart::fat_torus(c.d);
}

inline RealizationArtifact realize(const Config& c) {
  RealizationParams p = realization_params(c);
  BuildOptions o;
  o.rho_cut = c.rho_cut;
  return build_realization(p, chart_for(c, p.q), c.generator(), o);
}

inline NrtArtifact realize_nrt(const Config& c) {
  std::int64_t M = 1;
  for (int j = 1; j < c.d; ++j) M *= c.A;
  if (M > (1 << 20)) throw Error(ErrorKind::ConstructionFailure, "baseline tower too tall: A^(d-1) = " + std::to_string(M));
  auto frag = fragment(c.generator(), static_cast<int>(M), 1.0, GridSpec{}, false);
  return build_nrt_baseline(c.d, c.A, frag, c.rho_cut);
}

/// Stride giving about 16 disc boxes out of M.
inline std::size_t disc_stride(std::int64_t M) { return static_cast<std::size_t>(std::max<std::int64_t>(1, M / 16)); }

inline double t_norm(const TowerParams& p) { return norm_cr(build_T(p, AmbientChart::fat_torus(2)), 1.0, t_norm_grid(p.q)).value; }

inline double fbar_norm(const RealizationArtifact& art) {
  if (art.Fbar.is_identity()) return 0.0;
  return norm_cr(art.Fbar, 1.0, fbar_grid(art, disc_stride(art.M()))).value;
}

/// Run matrix for the norm-scaling laws, d = 2 fat torus.
inline json scaling_table(const Config& c) {
  json out;
  out["T"] = json::array();
  for (std::int64_t A : c.t_scaling_A) {
    TowerParams p;
    p.A = A;
    p.q = c.q;
    p.r = 2.0 + c.eps;
    p.scaling_study = true;
    out["T"].push_back({{"A", A}, {"q", c.q}, {"norm", t_norm(p)}, {"predicted", 1.0 / static_cast<double>(A)}});
  }
  out["Fbar"] = json::array();
  Config sub = c;
  sub.mode = RunMode::FatTorus;
  sub.parameters = "explicit";
  for (auto [A, q] : c.scaling_runs) {
    sub.A = A;
    sub.q = q;
    auto art = realize(sub);
    double n = fbar_norm(art);
    double Ad = std::pow(static_cast<double>(A), c.d - 1);
    out["Fbar"].push_back({{"A", A}, {"q", q}, {"norm", n}, {"predicted", 1.0 / (Ad * q)}, {"predicted_alt", Ad / q}});
  }
  out["nrt"] = json::array();
  Config nrt = c;
  nrt.mode = RunMode::NrtTorus;
  nrt.d = 3;
  for (std::int64_t A : c.nrt_A) {
    nrt.A = A;
    auto art = realize_nrt(nrt);
    auto rep = verify_nrt(art, default_return_grid(2), disc_stride(art.M));
    out["nrt"].push_back({{"A", A}, {"norm", rep.perturbation_norm}, {"full_norm", rep.full_norm},
                          {"predicted", std::pow(static_cast<double>(A), -2.0)}, {"return_max", rep.ret.max_deviation}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Build

inline json build_artifact(const Config& c) {
  json doc;
  doc["format"] = "renorm-artifact";
  doc["version"] = kArtifactVersion;
  doc["config"] = to_json(c);
  if (c.mode == RunMode::NrtTorus) {
    auto art = realize_nrt(c);
    doc["nrt"] = {{"d", art.d}, {"A", art.A}, {"M", art.M}, {"rho", art.rho}};
    json cs = json::array();
    for (const auto& v : art.centres) cs.push_back(to_json(v));
    doc["nrt"]["centres"] = cs;
    doc["maps"] = {{"F", art.F.to_json()}};
    return doc;
  }
  auto art = realize(c);
  doc["params"] = to_json(art.params);
  doc["chart"] = art.chart.to_json();
  auto defects = measure_chart(art.chart, c.volume_samples, c.seed);
  doc["chart"]["isometry_defect"] = defects.isometry_defect;
  doc["chart"]["volume_defect"] = defects.volume_defect;
  doc["tower"] = to_json(art.tower);
  json sims = json::array();
  for (const auto& h : art.similarities) sims.push_back(h->to_json());
  doc["similarities"] = sims;
  doc["fragmentation"] = {{"M", art.frag.M}, {"unit_steps", art.frag.unit_steps}, {"r", art.frag.r}};
  doc["maps"] = {{"F", art.F.to_json()}};
  json measured = {{"gamma", art.tower.gamma}, {"Fbar_C1", fbar_norm(art)}};
  if (c.d == 2 && c.mode != RunMode::Ball) measured["T_C1"] = t_norm(art.params.tower());
  doc["measured"] = measured;
  if (c.mode == RunMode::ScalingStudy) doc["scaling"] = scaling_table(c);
  return doc;
}

// ---------------------------------------------------------------------------
// Verify

namespace detail {

inline Check bounded(std::string name, double value, double bound, std::string note = {}) {
  return {std::move(name), value <= bound, value, bound, std::move(note)};
}

/// sup over pts of the ambient distance |m(x) - x|.
inline double c0_distance(const MapExpr& m, const std::vector<Vec>& pts) {
  double worst = 0.0;
  for (const auto& p : pts) worst = std::max(worst, distance(m.source(), m.node().apply(p), p));
  return worst;
}

inline Vec iterate(const MapExpr& m, Vec x, std::int64_t n) {
  for (std::int64_t i = 0; i < n; ++i) x = m.node().apply(x);
  return x;
}

inline std::vector<Vec> disc_samples(const Vec& c, double rho, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec> pts;
  while (static_cast<int>(pts.size()) < n) {
    Vec v(c.size());
    for (int j = 0; j < c.size(); ++j) v[j] = u(rng);
    if (v.norm() < 0.95) pts.push_back(Vec(c + rho * v));
  }
  return pts;
}

inline void tower_checks(const RealizationArtifact& art, const TowerSpec& tw, const Config& c, std::vector<Check>& out) {
  const Ambient a = art.ambient();
  double rho = to_double(tw.rho);
  std::vector<Vec> tilde;
  for (const auto& ct : tw.centres_tilde) tilde.push_back(to_vec(ct));
  double dmin = min_pair_distance(Ambient::long_fat_torus(tw.params.d, tw.params.q), tilde, 2.0 * rho);
  out.push_back({"tower.disjoint", dmin > 2.0 * rho, dmin, 2.0 * rho, "min centre distance must exceed the bound"});

  std::int64_t flagged = std::count(tw.isometric.begin(), tw.isometric.end(), 1);
  double gamma = static_cast<double>(flagged) / static_cast<double>(tw.N);
  out.push_back({"tower.gamma", gamma >= 0.5, gamma, 0.5, "isometric fraction must be at least the bound"});
  out.push_back(bounded("tower.N", std::abs(static_cast<double>(tw.N - art.tower.N)), 0.0, "period matches q A^(d-1)"));

  // chart round trips cost accuracy in the ball ambient
  double per_step = c.mode == RunMode::Ball ? 1e-11 : 1e-12;
  double worst = 0.0;
  for (const auto& p : disc_samples(tw.centres.front(), rho, 100, c.seed)) {
    worst = std::max(worst, distance(a, iterate(art.T, p, tw.N), p));
  }
  out.push_back(bounded("tower.period", worst, std::max(1e-9, tw.N * per_step), "T^N on B"));

  auto isos = ambient_isometries(tw, art.chart);
  double iso_err = 0.0, orth_err = 0.0;
  for (std::size_t i = 0; i < isos.size(); ++i) {
    orth_err = std::max(orth_err, sup_norm(Mat(isos[i].orth.transpose() * isos[i].orth - identity(a.dim))));
    std::int64_t n = tw.times[i];
    for (const auto& p : disc_samples(tw.centres.front(), rho, 20, c.seed + i)) {
      Vec want = isos[i].apply(p);
      normalize(a, want);
      double e = distance(a, iterate(art.T, p, n), want) / std::max<double>(1.0, static_cast<double>(n));
      iso_err = std::max(iso_err, e);
    }
  }
  out.push_back(bounded("tower.isometries", iso_err, per_step, "per-step error of T^n_i against Iso_i"));
  out.push_back(bounded("tower.orthogonality", orth_err, 1e-14));
}

}  // namespace detail

/// Runs `suite` ("all", "tower", "return-map", "volume", "norms", "maps") on
/// an artifact document. Maps are rebuilt from the recorded config; tower
/// data is taken from the document.
inline json verify_artifact(const json& doc, const std::string& suite) {
  static const std::vector<std::string> suites = {"all", "tower", "return-map", "volume", "norms", "maps"};
  if (std::find(suites.begin(), suites.end(), suite) == suites.end()) {
    throw Error(ErrorKind::InvalidArgument, "unknown suite '" + suite + "'");
  }
  if (doc.value("format", "") != "renorm-artifact" || doc.value("version", 0) != kArtifactVersion) {
    throw Error(ErrorKind::InvalidArgument, "not a renorm artifact");
  }
  Config c = config_from_json(doc.at("config"));
  std::vector<Check> checks;
  // a suite that throws records one failed check and the rest still run
  auto run = [&](const char* s, auto&& body) {
    if (suite != "all" && suite != s) return;
    try {
      body();
    } catch (const Error& e) {
      checks.push_back({std::string(s) + ".error", false, 0.0, 0.0, e.what()});
    }
  };

  if (c.mode == RunMode::NrtTorus) {
    auto art = realize_nrt(c);
    Ambient tor = Ambient::torus(c.d - 1);
    run("maps", [&] { checks.push_back({"maps.match", art.F.to_json() == doc.at("maps").at("F"), 0.0, 0.0, "stored F equals rebuilt F"}); });
    std::vector<Vec> centres;
    for (const auto& v : doc.at("nrt").at("centres")) centres.push_back(vec_from_json(v));
    run("tower", [&] {
      double dmin = min_pair_distance(tor, centres, 2.0 * art.rho);
      checks.push_back({"tower.disjoint", dmin > 2.0 * art.rho, dmin, 2.0 * art.rho, "min centre distance must exceed the bound"});
    });
    run("return-map", [&] {
      NrtArtifact stored = art;
      stored.centres = centres;
      stored.similarities.clear();
      for (const auto& v : centres) stored.similarities.push_back(disc_similarity(tor, v, identity(c.d - 1), art.rho));
      stored.Fbar = piecewise_on_balls(tor, stored.centres, art.rho, stored.similarities, art.frag.factors, c.rho_cut);
      stored.F = compose(stored.S, stored.Fbar);
      auto rep = verify_nrt(stored, default_return_grid(c.d - 1), disc_stride(art.M));
      checks.push_back(detail::bounded("return_map.max", rep.ret.max_deviation, 1e-6));
      checks.push_back(detail::bounded("return_map.intermediate", rep.ret.intermediate_max, 1e-8));
    });
    run("volume", [&] { checks.push_back(detail::bounded("volume.F", volume_defect(art.F, c.volume_samples, c.seed), 1e-5)); });
  } else {
    auto art = realize(c);
    TowerSpec tw = tower_from_json(doc.at("tower"));
    run("maps", [&] { checks.push_back({"maps.match", art.F.to_json() == doc.at("maps").at("F"), 0.0, 0.0, "stored F equals rebuilt F"}); });
    run("tower", [&] { detail::tower_checks(art, tw, c, checks); });
    run("return-map", [&] {
      RealizationArtifact stored = art;
      stored.tower = tw;
      stored.isometries = ambient_isometries(tw, art.chart);
      stored.similarities = build_similarities(tw, stored.isometries, art.ambient());
      stored.Fbar = assemble_Fbar(stored.frag, tw, stored.similarities, art.ambient(), c.rho_cut);
      stored.F = assemble_F(stored.T, stored.Fbar);
      auto rep = return_map(stored, GridSpec::uniform(Box{Vec::Constant(c.d, -0.7), Vec::Constant(c.d, 0.7)}, c.return_grid));
      checks.push_back(detail::bounded("return_map.max", rep.max_deviation, 1e-6, "h0 F^N h0^-1 against f"));
      checks.push_back(detail::bounded("return_map.intermediate", rep.intermediate_max, 1e-8));
      checks.push_back(detail::bounded("return_map.centres", rep.centre_max, 1e-9));
      checks.push_back({"similarity.orth", rep.coherence_orth_exact, 0.0, 0.0, "chained orthogonal parts are exact"});
      checks.push_back(detail::bounded("similarity.shift", rep.coherence_shift, 1e-12));
    });
    run("volume", [&] {
      std::uint64_t s = c.seed;
      checks.push_back(detail::bounded("volume.T", volume_defect(art.T, c.volume_samples, s), 1e-5));
      checks.push_back(detail::bounded("volume.Fbar", volume_defect(art.Fbar, c.volume_samples, s + 1), 1e-5));
      checks.push_back(detail::bounded("volume.F", volume_defect(art.F, c.volume_samples, s + 2), 1e-5));
      checks.push_back(detail::bounded("volume.hq", volume_defect(build_snake(art.params.tower()), c.volume_samples, s + 3), 1e-5));
      std::vector<Vec> inside;
      for (std::int64_t i = 0; i < art.M(); i += static_cast<std::int64_t>(disc_stride(art.M()))) {
        auto pts = detail::disc_samples(art.disc_centre(static_cast<std::size_t>(i)), art.params.rho(), 20, s + 10 + static_cast<std::uint64_t>(i));
        inside.insert(inside.end(), pts.begin(), pts.end());
      }
      checks.push_back(detail::bounded("volume.F_on_discs", volume_defect_at(art.F, inside), 1e-5));
    });
    run("norms", [&] {
      auto pts = detail::grid_points(fbar_grid(art, disc_stride(art.M())));
      double nF = detail::c0_distance(art.F, pts), nFbar = detail::c0_distance(art.Fbar, pts), nT = detail::c0_distance(art.T, pts);
      checks.push_back(detail::bounded("norms.decomposition", nF, nFbar + nT + 1e-12, "C0: |F - Id| <= |Fbar - Id| + |T - Id|"));
      if (!doc.contains("scaling")) return;
      const json& s = doc["scaling"];
      if (s["T"].size() >= 2) {
        double ratio = s["T"][0]["norm"].get<double>() / s["T"][1]["norm"].get<double>();
        double expect = s["T"][1]["A"].get<double>() / s["T"][0]["A"].get<double>();
        checks.push_back({"scaling.T", std::abs(ratio / expect - 1.0) <= 0.2, ratio, expect, "ratio within 20%"});
      }
      for (const char* key : {"Fbar", "nrt"}) {
        if (s[key].empty()) continue;
        double lo = 1e300, hi = 0.0;
        for (const auto& row : s[key]) {
          double v = row["norm"].get<double>() / row["predicted"].get<double>();
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        checks.push_back({std::string("scaling.") + key, hi / lo <= 2.0, hi / lo, 2.0, "spread of norm / prediction"});
      }
    });
  }

  json report;
  report["suite"] = suite;
  report["mode"] = to_string(c.mode);
  report["checks"] = json::array();
  bool all = true;
  for (const auto& ch : checks) {
    report["checks"].push_back(to_json(ch));
    all = all && ch.pass;
  }
  report["pass"] = all;
  return report;
}

// ---------------------------------------------------------------------------
// Fragment

/// C-hat over the configured M values and the telescoping error on a 20^d
/// grid of [-0.95, 0.95]^d.
inline json fragment_report(const Config& c) {
  IsotopyGenerator gen = c.generator();
  int d = gen.dim();
  // reference time-one map on a 4x finer step, so the check is not the
  // factor chain replayed
  MapExpr psi1 = flow_between(std::make_shared<const IsotopyGenerator>(gen), 0.0, 1.0, 4 * unit_steps(gen));
  GridSpec tele = GridSpec::uniform(Box{Vec::Constant(d, -0.95), Vec::Constant(d, 0.95)}, 20);
  auto pts = detail::grid_points(tele);
  json runs = json::array();
  double lo = 1e300, hi = 0.0;
  for (int M : c.fragment_M) {
    auto res = fragment(gen, M, 1.0);
    MapExpr comp = res.composite();
    double tel = 0.0;
    for (const auto& p : pts) tel = std::max(tel, (comp.node().apply(p) - psi1.node().apply(p)).norm());
    runs.push_back({{"M", M}, {"c_hat", res.c_hat}, {"telescoping", tel}, {"unit_steps", res.unit_steps}});
    lo = std::min(lo, res.c_hat);
    hi = std::max(hi, res.c_hat);
  }
  return {{"runs", runs}, {"c_hat_spread", hi > 0.0 ? hi / lo : 1.0}};
}

}  // namespace renorm
