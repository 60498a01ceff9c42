#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "renorm/error.hpp"
#include "renorm/json_util.hpp"
#include "renorm/linalg.hpp"
#include "renorm/smoothstep.hpp"

namespace renorm {

/// Radial cutoff chi(|x|): 1 inside `inner`, 0 outside `outer`, C^6 between.
struct RadialCutoff {
  double inner = 0.6;
  double outer = 0.9;

  double value(double s) const { return 1.0 - step()((s - inner) / (outer - inner)); }
  double d1(double s) const { return -step().derivative((s - inner) / (outer - inner), 1) / (outer - inner); }
  double d2(double s) const {
    double w = outer - inner;
    return -step().derivative((s - inner) / w, 2) / (w * w);
  }

 private:
  static const Smoothstep& step() {
    static const Smoothstep s(6);
    return s;
  }
};

/// One Hamiltonian term acting in the coordinate plane (i, j):
///   H = (c0 + c1 t) * g(x) * chi(|x|),
/// with g a monomial prod x_k^{e_k} or a Fourier mode cos(2 pi k.x + phase).
/// Its field is V_i = dH/dx_j, V_j = -dH/dx_i, which is divergence-free.
struct HamiltonianTerm {
  enum class Shape { Monomial, Fourier };

  Shape shape = Shape::Monomial;
  int plane_i = 0;
  int plane_j = 1;
  std::vector<int> exponents;     // monomial
  std::vector<double> frequency;  // fourier
  double phase = 0.0;
  double coeff = 0.0;
  double coeff_rate = 0.0;

  double coefficient(double t) const { return coeff + coeff_rate * t; }

  /// g, grad g and Hess g at x.
  void shape_derivatives(const Vec& x, double& g, Vec& grad, Mat& hess) const {
    int d = static_cast<int>(x.size());
    grad = Vec::Zero(d);
    hess = Mat::Zero(d, d);
    if (shape == Shape::Fourier) {
      double arg = phase;
      for (int k = 0; k < d; ++k) arg += 2.0 * M_PI * frequency[static_cast<std::size_t>(k)] * x[k];
      g = std::cos(arg);
      double s = std::sin(arg);
      for (int a = 0; a < d; ++a) {
        double ka = 2.0 * M_PI * frequency[static_cast<std::size_t>(a)];
        grad[a] = -ka * s;
        for (int b = 0; b < d; ++b) hess(a, b) = -ka * 2.0 * M_PI * frequency[static_cast<std::size_t>(b)] * g;
      }
      return;
    }
    auto pw = [&](int k, int e) { return e <= 0 ? (e == 0 ? 1.0 : 0.0) : std::pow(x[k], e); };
    g = 1.0;
    for (int k = 0; k < d; ++k) g *= pw(k, exponents[static_cast<std::size_t>(k)]);
    for (int a = 0; a < d; ++a) {
      int ea = exponents[static_cast<std::size_t>(a)];
      if (ea == 0) continue;
      double v = ea;
      for (int k = 0; k < d; ++k) v *= pw(k, exponents[static_cast<std::size_t>(k)] - (k == a ? 1 : 0));
      grad[a] = v;
      for (int b = 0; b < d; ++b) {
        int eb = exponents[static_cast<std::size_t>(b)] - (b == a ? 1 : 0);
        if (eb == 0) continue;
        double w = static_cast<double>(ea) * eb;
        for (int k = 0; k < d; ++k) {
          int e = exponents[static_cast<std::size_t>(k)] - (k == a ? 1 : 0) - (k == b ? 1 : 0);
          w *= pw(k, e);
        }
        hess(a, b) = w;
      }
    }
  }
};

/// Conservative time-dependent vector field on the unit ball, generating the
/// isotopy psi_t with psi_0 = Id and psi_1 = f.
class IsotopyGenerator {
 public:
  IsotopyGenerator(int dim, std::vector<HamiltonianTerm> terms, std::optional<RadialCutoff> cutoff,
                   double tolerance = 1e-9)
      : dim_(dim), terms_(std::move(terms)), cutoff_(cutoff), tolerance_(tolerance) {
    if (dim_ < 2 || dim_ > kMaxDim) throw Error(ErrorKind::InvalidArgument, "generator dimension");
    if (cutoff_ && !(0.0 <= cutoff_->inner && cutoff_->inner < cutoff_->outer && cutoff_->outer < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "cutoff needs 0 <= inner < outer < 1");
    }
    if (!(tolerance_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be positive");
    for (const auto& t : terms_) {
      if (t.plane_i == t.plane_j || t.plane_i < 0 || t.plane_j < 0 || t.plane_i >= dim_ || t.plane_j >= dim_) {
        throw Error(ErrorKind::InvalidArgument, "term plane out of range");
      }
      if (t.shape == HamiltonianTerm::Shape::Monomial && static_cast<int>(t.exponents.size()) != dim_) {
        throw Error(ErrorKind::InvalidArgument, "monomial exponents must have one entry per coordinate");
      }
      if (t.shape == HamiltonianTerm::Shape::Fourier && static_cast<int>(t.frequency.size()) != dim_) {
        throw Error(ErrorKind::InvalidArgument, "fourier frequency must have one entry per coordinate");
      }
    }
  }

  int dim() const { return dim_; }
  const std::vector<HamiltonianTerm>& terms() const { return terms_; }
  const std::optional<RadialCutoff>& cutoff() const { return cutoff_; }
  double tolerance() const { return tolerance_; }

  /// True when the field vanishes identically.
  bool is_zero() const {
    for (const auto& t : terms_)
      if (t.coeff != 0.0 || t.coeff_rate != 0.0) return false;
    return true;
  }

  /// Radius outside of which the field vanishes (infinite without cutoff).
  double support_radius() const { return cutoff_ ? cutoff_->outer : kInfiniteRadius; }

  Vec field(double t, const Vec& x) const {
    Vec v = Vec::Zero(dim_);
    accumulate(t, x, &v, nullptr);
    return v;
  }

  Mat field_jacobian(double t, const Vec& x) const {
    Mat j = Mat::Zero(dim_, dim_);
    accumulate(t, x, nullptr, &j);
    return j;
  }

  void field_and_jacobian(double t, const Vec& x, Vec& v, Mat& j) const {
    v = Vec::Zero(dim_);
    j = Mat::Zero(dim_, dim_);
    accumulate(t, x, &v, &j);
  }

  double divergence(double t, const Vec& x) const { return field_jacobian(t, x).trace(); }

  json to_json() const {
    json terms = json::array();
    for (const auto& t : terms_) {
      json jt = {{"plane", {t.plane_i, t.plane_j}}, {"coeff", t.coeff}, {"coeff_rate", t.coeff_rate}};
      if (t.shape == HamiltonianTerm::Shape::Monomial) {
        jt["type"] = "monomial";
        jt["exponents"] = t.exponents;
      } else {
        jt["type"] = "fourier";
        jt["frequency"] = t.frequency;
        jt["phase"] = t.phase;
      }
      terms.push_back(jt);
    }
    json j = {{"dim", dim_}, {"terms", terms}, {"tolerance", tolerance_}};
    j["cutoff"] = cutoff_ ? json{{"inner", cutoff_->inner}, {"outer", cutoff_->outer}} : json(nullptr);
    return j;
  }

  static IsotopyGenerator from_json(const json& j) {
    static const std::set<std::string> allowed = {"dim", "terms", "cutoff", "tolerance"};
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) throw Error(ErrorKind::InvalidArgument, "unknown generator key '" + it.key() + "'");
    }
    int dim = j.at("dim").get<int>();
    std::vector<HamiltonianTerm> terms;
    for (const auto& jt : j.value("terms", json::array())) {
      static const std::set<std::string> term_keys = {"plane", "type", "exponents", "frequency", "phase", "coeff", "coeff_rate"};
      for (auto it = jt.begin(); it != jt.end(); ++it) {
        if (!term_keys.count(it.key())) throw Error(ErrorKind::InvalidArgument, "unknown term key '" + it.key() + "'");
      }
      HamiltonianTerm t;
      auto plane = jt.value("plane", std::vector<int>{0, 1});
      if (plane.size() != 2) throw Error(ErrorKind::InvalidArgument, "term plane needs two indices");
      t.plane_i = plane[0];
      t.plane_j = plane[1];
      std::string type = jt.value("type", std::string("monomial"));
      if (type == "monomial") {
        t.shape = HamiltonianTerm::Shape::Monomial;
        t.exponents = jt.at("exponents").get<std::vector<int>>();
      } else if (type == "fourier") {
        t.shape = HamiltonianTerm::Shape::Fourier;
        t.frequency = jt.at("frequency").get<std::vector<double>>();
        t.phase = jt.value("phase", 0.0);
      } else {
        throw Error(ErrorKind::InvalidArgument, "unknown term type " + type);
      }
      t.coeff = jt.value("coeff", 0.0);
      t.coeff_rate = jt.value("coeff_rate", 0.0);
      terms.push_back(std::move(t));
    }
    std::optional<RadialCutoff> cutoff;
    if (j.contains("cutoff") && !j.at("cutoff").is_null()) {
      cutoff = RadialCutoff{j.at("cutoff").value("inner", 0.6), j.at("cutoff").value("outer", 0.9)};
    }
    return IsotopyGenerator(dim, std::move(terms), cutoff, j.value("tolerance", 1e-9));
  }

  static constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

 private:
  void accumulate(double t, const Vec& x, Vec* v, Mat* jac) const {
    int d = dim_;
    double chi = 1.0;
    Vec gchi = Vec::Zero(d);
    Mat hchi = Mat::Zero(d, d);
    if (cutoff_) {
      double s = x.norm();
      if (s >= cutoff_->outer) return;
      chi = cutoff_->value(s);
      if (s > cutoff_->inner) {
        double c1 = cutoff_->d1(s), c2 = cutoff_->d2(s);
        Vec e = x / s;
        gchi = c1 * e;
        hchi = c2 * e * e.transpose() + (c1 / s) * (identity(d) - e * e.transpose());
      }
    }
    double g;
    Vec gg;
    Mat hg;
    for (const auto& term : terms_) {
      double c = term.coefficient(t);
      if (c == 0.0) continue;
      term.shape_derivatives(x, g, gg, hg);
      Vec grad_h = c * (chi * gg + g * gchi);
      int i = term.plane_i, j = term.plane_j;
      if (v) {
        (*v)[i] += grad_h[j];
        (*v)[j] -= grad_h[i];
      }
      if (jac) {
        Mat hess = c * (chi * hg + gg * gchi.transpose() + gchi * gg.transpose() + g * hchi);
        jac->row(i) += hess.row(j);
        jac->row(j) -= hess.row(i);
      }
    }
  }

  int dim_;
  std::vector<HamiltonianTerm> terms_;
  std::optional<RadialCutoff> cutoff_;
  double tolerance_;
};

}  // namespace renorm
