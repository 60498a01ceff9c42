#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "renorm/fragmentation.hpp"
#include "sample_targets.hpp"

using namespace renorm;

namespace {

using sample::monomial;
using sample::rotation;

IsotopyGenerator sample_generator() { return sample::generator2(); }

Vec rotate(const Vec& x, double a) {
  Vec y(2);
  y << x[0] * std::cos(a) + x[1] * std::sin(a), -x[0] * std::sin(a) + x[1] * std::cos(a);
  return y;
}

std::vector<Vec> disc_grid(int n, double R) {
  std::vector<Vec> pts;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec p(2);
      p << -R + 2 * R * i / (n - 1), -R + 2 * R * j / (n - 1);
      if (p.norm() <= R) pts.push_back(p);
    }
  return pts;
}

}  // namespace

TEST_CASE("field is divergence-free and vanishes outside the cutoff") {
  auto gen = sample_generator();
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    Vec x = sample_point(Ambient::ball(2), rng);
    double t = static_cast<double>(i) / 500;
    CHECK(std::abs(gen.divergence(t, x)) <= 1e-10);
    if (x.norm() >= 0.9) CHECK(gen.field(t, x).norm() == 0.0);
  }
}

TEST_CASE("analytic field jacobian matches finite differences") {
  auto gen = sample_generator();
  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    Vec x = sample_point(Ambient::ball(2), rng) * 0.95;
    Mat fd(2, 2);
    double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Vec e = Vec::Zero(2);
      e[j] = h;
      fd.col(j) = (gen.field(0.3, x + e) - gen.field(0.3, x - e)) / (2 * h);
    }
    CHECK(sup_norm(Mat(fd - gen.field_jacobian(0.3, x))) <= 1e-6);
  }
}

TEST_CASE("three-dimensional generators stay divergence-free") {
  IsotopyGenerator gen(3, {monomial({1, 1, 1}, 0.7, 0.0, 0, 2), monomial({0, 2, 1}, 0.4, 0.2, 1, 2)}, RadialCutoff{});
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) CHECK(std::abs(gen.divergence(0.5, sample_point(Ambient::ball(3), rng))) <= 1e-10);
}

TEST_CASE("generator json round trip and key checks") {
  auto gen = sample_generator();
  auto back = IsotopyGenerator::from_json(gen.to_json());
  CHECK(back.to_json() == gen.to_json());
  json bad = gen.to_json();
  bad["radius"] = 0.5;
  CHECK_THROWS_AS(IsotopyGenerator::from_json(bad), Error);
}

TEST_CASE("flow at time zero is the identity") {
  CHECK(flow(sample_generator(), 0.0).is_identity());
  CHECK(flow(IsotopyGenerator(2, {}, RadialCutoff{}), 1.0).is_identity());
}

TEST_CASE("rotation field flows by a rigid rotation") {
  double omega = 2.0;
  auto gen = rotation(omega);
  for (double t : {0.25, 0.5, 1.0}) {
    auto psi = flow(gen, t);
    CHECK(psi.kind() == "FlowMap");
    double worst = 0.0;
    for (const auto& p : disc_grid(15, 0.9)) worst = std::max(worst, (psi(p) - rotate(p, omega * t)).norm());
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("flow satisfies the semigroup law and inverts by time reversal") {
  auto gen = sample_generator();
  auto g = std::make_shared<const IsotopyGenerator>(gen);
  int n = unit_steps(gen);
  auto full = flow(gen, 1.0);
  auto first = flow(gen, 0.5);
  auto second = flow_between(g, 0.5, 1.0, n);
  auto back = invert(full);
  double semi = 0.0, inv = 0.0;
  for (const auto& p : disc_grid(20, 0.95)) {
    semi = std::max(semi, (full(p) - second(first(p))).norm());
    inv = std::max(inv, (back(full(p)) - p).norm());
  }
  CHECK(semi <= 1e-8);
  CHECK(inv <= 1e-12);
}

TEST_CASE("flow jacobian has unit determinant and matches differences") {
  auto gen = sample_generator();
  auto psi = flow(gen, 1.0);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 30; ++i) {
    Vec x = sample_point(Ambient::ball(2), rng);
    Mat j = psi.node().jacobian(x, 1e-6);
    CHECK(std::abs(j.determinant() - 1.0) <= 1e-6);
    if (x.norm() < 0.95) CHECK(sup_norm(Mat(fd_jacobian(psi.node(), x, 1e-6) - j)) <= 1e-6);
  }
}

TEST_CASE("zero field fragments into identities") {
  auto res = fragment(IsotopyGenerator(2, {}, RadialCutoff{}), 8, 1.0);
  CHECK(res.factors.size() == 8);
  for (const auto& f : res.factors) CHECK(f.is_identity());
  CHECK(res.c_hat == 0.0);
}

TEST_CASE("rotation fragments into quarter slices") {
  double omega = 1.2;
  auto res = fragment(rotation(omega), 4, 1.0, GridSpec{}, false);
  for (const auto& f : res.factors) {
    for (const auto& p : disc_grid(9, 0.9)) CHECK((f(p) - rotate(p, omega / 4)).norm() <= 1e-9);
  }
  auto c = res.composite();
  for (const auto& p : disc_grid(9, 0.9)) CHECK((c(p) - rotate(p, omega)).norm() <= 1e-9);
}

TEST_CASE("factors telescope, keep support and preserve volume") {
  auto gen = sample_generator();
  auto f = flow(gen, 1.0);
  for (int M : {16, 64}) {
    auto res = fragment(gen, M, 1.0, GridSpec{}, false);
    auto c = res.composite();
    double worst = 0.0;
    for (const auto& p : disc_grid(20, 0.999)) worst = std::max(worst, (c(p) - f(p)).norm());
    CHECK(worst <= 1e-8);

    std::mt19937_64 rng(static_cast<std::uint64_t>(M));
    for (int i = 0; i < 200; ++i) {
      Vec x = sample_point(Ambient::ball(2), rng);
      if (x.norm() < 0.9) continue;
      for (const auto& fi : res.factors) CHECK(fi(x) == x);
    }
    double vol = 0.0;
    for (std::size_t i = 0; i < res.factors.size(); i += 5) vol = std::max(vol, volume_defect(res.factors[i], 100, i + 1));
    CHECK(vol <= 1e-6);
  }
}

TEST_CASE("measured fragmentation constant is stable in M") {
  auto gen = sample_generator();
  std::vector<double> c;
  for (int M : {16, 64, 256}) c.push_back(fragment(gen, M, 1.0).c_hat);
  double lo = *std::min_element(c.begin(), c.end()), hi = *std::max_element(c.begin(), c.end());
  INFO("C-hat: " << c[0] << " " << c[1] << " " << c[2]);
  CHECK(lo > 0.0);
  CHECK(hi <= 2.0 * lo);
}
