#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "renorm/generator.hpp"
#include "renorm/json_util.hpp"
#include "renorm/presets.hpp"

namespace renorm {

enum class RunMode { FatTorus, Ball, NrtTorus, ScalingStudy };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::FatTorus: return "fat-torus";
    case RunMode::Ball: return "ball";
    case RunMode::NrtTorus: return "nrt-torus";
    case RunMode::ScalingStudy: return "scaling-study";
  }
  return "?";
}

/// Batch configuration. Every key has a default; unknown keys are rejected.
///
/// parameters = "explicit" uses (A, q) as given and waives q^{r^4} < A;
/// "select" chooses them from (eps, delta, C_hat, C1_hat).
struct Config {
  RunMode mode = RunMode::FatTorus;
  int d = 2;
  double eps = 0.01;
  double delta = 0.1;
  std::string parameters = "explicit";
  std::int64_t A = 32;
  int q = 4;
  double C_hat = 1.0;
  double C1_hat = 1.0;
  double c1 = 0.5;
  double c2 = 0.5;
  json target = "sample";  // preset name or generator document
  double rho_cut = 0.9;
  int return_grid = 10;
  int volume_samples = 10000;
  std::uint64_t seed = 1;
  std::vector<std::pair<std::int64_t, int>> scaling_runs = {{16, 2}, {32, 2}, {32, 4}};
  std::vector<std::int64_t> t_scaling_A = {32, 64};
  std::vector<std::int64_t> nrt_A = {16, 32, 64};
  std::vector<int> fragment_M = {16, 64, 256};

  /// Dimension of the unit ball the target acts on.
  int target_dim() const { return mode == RunMode::NrtTorus ? d - 1 : d; }

  IsotopyGenerator generator() const {
    if (target.is_string()) return presets::by_name(target.get<std::string>(), target_dim());
    IsotopyGenerator g = IsotopyGenerator::from_json(target);
    if (g.dim() != target_dim()) {
      throw Error(ErrorKind::InvalidArgument, "target acts in dimension " + std::to_string(g.dim()) + ", expected " +
                                                  std::to_string(target_dim()));
    }
    return g;
  }
};

inline json to_json(const Config& c) {
  json runs = json::array();
  for (auto [A, q] : c.scaling_runs) runs.push_back(json::array({A, q}));
  return {{"mode", to_string(c.mode)},
          {"d", c.d},
          {"eps", c.eps},
          {"delta", c.delta},
          {"parameters", c.parameters},
          {"A", c.A},
          {"q", c.q},
          {"C_hat", c.C_hat},
          {"C1_hat", c.C1_hat},
          {"c1", c.c1},
          {"c2", c.c2},
          {"target", c.target},
          {"rho_cut", c.rho_cut},
          {"return_grid", c.return_grid},
          {"volume_samples", c.volume_samples},
          {"seed", c.seed},
          {"scaling_runs", runs},
          {"t_scaling_A", c.t_scaling_A},
          {"nrt_A", c.nrt_A},
          {"fragment_M", c.fragment_M}};
}

inline Config config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "config must be a JSON object");
  Config c;
  const json defaults = to_json(c);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!defaults.contains(it.key())) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + it.key() + "'");
  }
  try {
    if (j.contains("mode")) {
      std::string m = j["mode"].get<std::string>();
      if (m == "fat-torus") c.mode = RunMode::FatTorus;
      else if (m == "ball") c.mode = RunMode::Ball;
      else if (m == "nrt-torus") c.mode = RunMode::NrtTorus;
      else if (m == "scaling-study") c.mode = RunMode::ScalingStudy;
      else throw Error(ErrorKind::InvalidArgument, "unknown mode '" + m + "'");
    }
    c.d = j.value("d", c.d);
    c.eps = j.value("eps", c.eps);
    c.delta = j.value("delta", c.delta);
    c.parameters = j.value("parameters", c.parameters);
    c.A = j.value("A", c.A);
    c.q = j.value("q", c.q);
    c.C_hat = j.value("C_hat", c.C_hat);
    c.C1_hat = j.value("C1_hat", c.C1_hat);
    c.c1 = j.value("c1", c.c1);
    c.c2 = j.value("c2", c.c2);
    if (j.contains("target")) c.target = j["target"];
    c.rho_cut = j.value("rho_cut", c.rho_cut);
    c.return_grid = j.value("return_grid", c.return_grid);
    c.volume_samples = j.value("volume_samples", c.volume_samples);
    c.seed = j.value("seed", c.seed);
    if (j.contains("scaling_runs")) {
      c.scaling_runs.clear();
      for (const auto& r : j["scaling_runs"]) c.scaling_runs.emplace_back(r.at(0).get<std::int64_t>(), r.at(1).get<int>());
    }
    c.t_scaling_A = j.value("t_scaling_A", c.t_scaling_A);
    c.nrt_A = j.value("nrt_A", c.nrt_A);
    c.fragment_M = j.value("fragment_M", c.fragment_M);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("config: ") + e.what());
  }

  if (c.parameters != "explicit" && c.parameters != "select") {
    throw Error(ErrorKind::InvalidArgument, "parameters must be 'explicit' or 'select'");
  }
  int min_d = c.mode == RunMode::NrtTorus ? 3 : 2;
  if (c.d < min_d || c.d > kMaxDim) throw Error(ErrorKind::InvalidArgument, "d out of range for mode " + std::string(to_string(c.mode)));
  if (c.mode == RunMode::Ball && c.d != 2) throw Error(ErrorKind::InvalidArgument, "ball mode needs d = 2");
  if (c.A < 2 || c.q < 2) throw Error(ErrorKind::InvalidArgument, "A and q must be >= 2");
  if (!(c.rho_cut > 0.0 && c.rho_cut < 1.0)) throw Error(ErrorKind::InvalidArgument, "rho_cut must lie in (0, 1)");
  if (c.return_grid < 1 || c.volume_samples < 100) throw Error(ErrorKind::InvalidArgument, "grid or sample count too small");
  c.generator();  // validates the target
  return c;
}

}  // namespace renorm
