#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "renorm/generator.hpp"
#include "renorm/map_expr.hpp"
#include "renorm/norm.hpp"
#include "renorm/parallel.hpp"

namespace renorm {

namespace gl4 {

inline constexpr double kSqrt3 = 1.7320508075688772;
inline constexpr double c1 = 0.5 - kSqrt3 / 6.0;
inline constexpr double c2 = 0.5 + kSqrt3 / 6.0;
inline constexpr double a11 = 0.25;
inline constexpr double a12 = 0.25 - kSqrt3 / 6.0;
inline constexpr double a21 = 0.25 + kSqrt3 / 6.0;
inline constexpr double a22 = 0.25;

/// One two-stage Gauss-Legendre step from (t, x) with step h. The stage
/// equations are solved by fixed-point iteration. Writes the stage points
/// into X1, X2 when asked. The method is symmetric, so a step with -h from
/// t + h undoes a step with h from t.
inline Vec step(const IsotopyGenerator& gen, double t, double h, const Vec& x, Vec* X1 = nullptr, Vec* X2 = nullptr) {
  Vec k1 = gen.field(t + c1 * h, x);
  Vec k2 = gen.field(t + c2 * h, x);
  if (sup_norm(k1) == 0.0 && sup_norm(k2) == 0.0) {
    if (X1) *X1 = x;
    if (X2) *X2 = x;
    return x;
  }
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    Vec y1 = x + h * (a11 * k1 + a12 * k2);
    Vec y2 = x + h * (a21 * k1 + a22 * k2);
    Vec n1 = gen.field(t + c1 * h, y1);
    Vec n2 = gen.field(t + c2 * h, y2);
    double change = std::abs(h) * std::max(sup_norm(Vec(n1 - k1)), sup_norm(Vec(n2 - k2)));
    k1 = n1;
    k2 = n2;
    if (change <= 1e-16 || (change >= last && change <= 1e-13)) {
      if (X1) *X1 = x + h * (a11 * k1 + a12 * k2);
      if (X2) *X2 = x + h * (a21 * k1 + a22 * k2);
      return x + 0.5 * h * (k1 + k2);
    }
    last = change;
  }
  throw Error(ErrorKind::IntegrationFailure, "Gauss-Legendre stage iteration did not converge; step too large");
}

/// Step plus its exact derivative: the stage Jacobians solve a linear block
/// system at the converged stage points.
inline Vec step_with_jacobian(const IsotopyGenerator& gen, double t, double h, const Vec& x, Mat& phi) {
  Vec X1, X2;
  Vec out = step(gen, t, h, x, &X1, &X2);
  int d = gen.dim();
  Mat D1 = gen.field_jacobian(t + c1 * h, X1);
  Mat D2 = gen.field_jacobian(t + c2 * h, X2);
  if (sup_norm(D1) == 0.0 && sup_norm(D2) == 0.0) return out;
  Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  sys.block(0, 0, d, d) -= h * a11 * D1;
  sys.block(0, d, d, d) -= h * a12 * D1;
  sys.block(d, 0, d, d) -= h * a21 * D2;
  sys.block(d, d, d, d) -= h * a22 * D2;
  Eigen::MatrixXd rhs(2 * d, d);
  rhs.topRows(d) = D1 * phi;
  rhs.bottomRows(d) = D2 * phi;
  Eigen::MatrixXd k = sys.partialPivLu().solve(rhs);
  phi = phi + 0.5 * h * (k.topRows(d) + k.bottomRows(d));
  return out;
}

}  // namespace gl4

/// psi_{t1} o psi_{t0}^{-1}: the flow of a generator from time t0 to t1 with
/// a fixed number of Gauss-Legendre steps.
class FlowMapNode final : public MapNode {
 public:
  FlowMapNode(std::shared_ptr<const IsotopyGenerator> gen, double t0, double t1, int steps)
      : MapNode(Ambient::ball(gen->dim()), Ambient::ball(gen->dim())), gen_(std::move(gen)), t0_(t0), t1_(t1), steps_(steps) {
    if (steps_ < 1) throw Error(ErrorKind::InvalidArgument, "flow needs at least one step");
  }

  std::string kind() const override { return "FlowMap"; }
  const IsotopyGenerator& generator() const { return *gen_; }
  const std::shared_ptr<const IsotopyGenerator>& generator_ptr() const { return gen_; }
  double t0() const { return t0_; }
  double t1() const { return t1_; }
  int steps() const { return steps_; }

  Vec apply(const Vec& x) const override {
    if (x.norm() >= gen_->support_radius()) return x;
    double h = (t1_ - t0_) / steps_;
    Vec y = x;
    for (int i = 0; i < steps_; ++i) y = gl4::step(*gen_, t0_ + i * h, h, y);
    return y;
  }

  Mat jacobian(const Vec& x, double /*step*/) const override {
    Mat phi = identity(gen_->dim());
    if (x.norm() >= gen_->support_radius()) return phi;
    double h = (t1_ - t0_) / steps_;
    Vec y = x;
    for (int i = 0; i < steps_; ++i) y = gl4::step_with_jacobian(*gen_, t0_ + i * h, h, y, phi);
    return phi;
  }

  NodePtr inverse() const override { return std::make_shared<FlowMapNode>(gen_, t1_, t0_, steps_); }

  double support_scale() const override { return 2.0 * gen_->support_radius(); }

  json to_json() const override {
    json j = header();
    j["generator"] = gen_->to_json();
    j["t0"] = t0_;
    j["t1"] = t1_;
    j["steps"] = steps_;
    return j;
  }

 private:
  std::shared_ptr<const IsotopyGenerator> gen_;
  double t0_, t1_;
  int steps_;
};

/// Probe points for step control: axis points and a seeded cloud inside the
/// support of the field.
inline std::vector<Vec> flow_probe_points(const IsotopyGenerator& gen) {
  int d = gen.dim();
  double R = std::min(0.95, gen.support_radius());
  std::vector<Vec> pts;
  for (int j = 0; j < d; ++j) {
    for (double s : {-0.5, 0.5, 0.85}) {
      Vec p = Vec::Zero(d);
      p[j] = s * R;
      pts.push_back(p);
    }
  }
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  while (pts.size() < static_cast<std::size_t>(3 * d + 16)) {
    Vec p(d);
    for (int j = 0; j < d; ++j) p[j] = u(rng);
    if (p.norm() < 1.0) pts.push_back(R * p);
  }
  return pts;
}

/// Steps per unit time meeting the generator tolerance over [0, 1]. Doubles n
/// until the n and 2n solutions agree to the tolerance at every probe, then
/// keeps 2n.
inline int unit_steps(const IsotopyGenerator& gen) {
  if (gen.is_zero()) return 1;
  auto probes = flow_probe_points(gen);
  auto run = [&](int n, const Vec& x) {
    double h = 1.0 / n;
    Vec y = x;
    for (int i = 0; i < n; ++i) y = gl4::step(gen, i * h, h, y);
    return y;
  };
  constexpr int kMaxSteps = 1 << 16;
  for (int n = 4; n <= kMaxSteps; n *= 2) {
    double err = 0.0;
    try {
      for (const auto& p : probes) err = std::max(err, (run(n, p) - run(2 * n, p)).norm());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::IntegrationFailure) throw;
      continue;
    }
    if (err <= gen.tolerance()) return 2 * n;
  }
  throw Error(ErrorKind::IntegrationFailure, "step control could not meet tolerance with 2^17 steps per unit time");
}

/// psi_{t1} o psi_{t0}^{-1} with `per_unit` steps per unit time.
inline MapExpr flow_between(std::shared_ptr<const IsotopyGenerator> gen, double t0, double t1, int per_unit) {
  if (t0 == t1 || gen->is_zero()) return identity_map(Ambient::ball(gen->dim()));
  int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t1 - t0) * per_unit - 1e-9)));
  return MapExpr(std::make_shared<FlowMapNode>(std::move(gen), t0, t1, steps));
}

/// psi_t, the time-t map of the isotopy.
inline MapExpr flow(const IsotopyGenerator& gen, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw Error(ErrorKind::InvalidArgument, "flow time must lie in [0, 1]");
  auto g = std::make_shared<const IsotopyGenerator>(gen);
  if (t == 0.0 || gen.is_zero()) return identity_map(Ambient::ball(gen.dim()));
  return flow_between(g, 0.0, t, unit_steps(gen));
}

/// Default sampling for factor norms: a tensor grid on the cube around the
/// ball, 21 points per axis in d = 2 and 11 above.
inline GridSpec default_factor_grid(int d) {
  Vec lo = Vec::Constant(d, -0.95), hi = Vec::Constant(d, 0.95);
  return GridSpec::uniform(Box{lo, hi}, d == 2 ? 21 : 11);
}

struct FragmentationResult {
  /// factors[i] = psi_{(i+1)/M} o psi_{i/M}^{-1}; factor 0 acts first.
  std::vector<MapExpr> factors;
  std::vector<NormEstimate> norms;
  double c_hat = 0.0;  // M * max_i ||f_i - Id||_r
  int M = 0;
  double r = 0.0;
  int unit_steps = 0;
  std::shared_ptr<const IsotopyGenerator> generator;

  /// f_{M-1} o ... o f_0.
  MapExpr composite() const {
    std::vector<MapExpr> chain(factors.rbegin(), factors.rend());
    return compose(chain);
  }
};

inline FragmentationResult fragment(const IsotopyGenerator& gen, int M, double r,
                                    const GridSpec& grid = GridSpec{}, bool measure = true) {
  if (M < 1) throw Error(ErrorKind::InvalidArgument, "fragment needs M >= 1");
  FragmentationResult res;
  res.M = M;
  res.r = r;
  res.generator = std::make_shared<const IsotopyGenerator>(gen);
  res.unit_steps = unit_steps(gen);
  for (int i = 0; i < M; ++i) {
    res.factors.push_back(flow_between(res.generator, static_cast<double>(i) / M, static_cast<double>(i + 1) / M,
                                       res.unit_steps));
  }
  if (!measure) return res;
  GridSpec g = grid.boxes.empty() ? default_factor_grid(gen.dim()) : grid;
  res.norms.resize(static_cast<std::size_t>(M));
  // norm_cr parallelizes over points; slices run one after another
  for (int i = 0; i < M; ++i) res.norms[static_cast<std::size_t>(i)] = norm_cr(res.factors[static_cast<std::size_t>(i)], r, g);
  double worst = 0.0;
  for (const auto& n : res.norms) worst = std::max(worst, n.value);
  res.c_hat = M * worst;
  return res;
}

}  // namespace renorm
