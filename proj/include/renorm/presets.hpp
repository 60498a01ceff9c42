#pragma once

#include <string>
#include <vector>

#include "renorm/generator.hpp"

namespace renorm::presets {

inline HamiltonianTerm monomial(std::vector<int> e, double c, double rate = 0.0, int i = 0, int j = 1) {
  HamiltonianTerm t;
  t.exponents = std::move(e);
  t.coeff = c;
  t.coeff_rate = rate;
  t.plane_i = i;
  t.plane_j = j;
  return t;
}

/// H = omega |x|^2 / 2 in the (0,1) plane, no cutoff: rigid rotation.
inline IsotopyGenerator rotation(double omega) {
  return IsotopyGenerator(2, {monomial({2, 0}, omega / 2), monomial({0, 2}, omega / 2)}, std::nullopt);
}

inline IsotopyGenerator zero(int d) { return IsotopyGenerator(d, {}, RadialCutoff{0.6, 0.9}); }

/// Cut-off Hamiltonian target with a time-dependent non-radial part; in
/// d >= 3 the extra terms act in the (1,2) plane.
inline IsotopyGenerator sample(int d) {
  if (d == 2) {
    HamiltonianTerm f;
    f.shape = HamiltonianTerm::Shape::Fourier;
    f.frequency = {0.5, 0.25};
    f.phase = 0.3;
    f.coeff = 0.04;
    return IsotopyGenerator(2, {monomial({2, 0}, 0.15, 0.1), monomial({0, 2}, 0.12), monomial({1, 2}, 0.2, -0.12), f},
                            RadialCutoff{0.6, 0.9});
  }
  auto e = [d](std::vector<int> head) {
    head.resize(static_cast<std::size_t>(d), 0);
    return head;
  };
  return IsotopyGenerator(d, {monomial(e({2, 0, 0}), 0.15, 0.1), monomial(e({0, 2, 0}), 0.1), monomial(e({0, 1, 2}), 0.15, 0.0, 1, 2)},
                          RadialCutoff{0.6, 0.9});
}

/// "identity" or "sample".
inline IsotopyGenerator by_name(const std::string& name, int d) {
  if (name == "identity") return zero(d);
  if (name == "sample") return sample(d);
  throw Error(ErrorKind::InvalidArgument, "unknown target preset '" + name + "'");
}

}  // namespace renorm::presets
