#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "renorm/ambient.hpp"
#include "renorm/json_util.hpp"
#include "renorm/rational.hpp"

namespace renorm {

class MapNode;
using NodePtr = std::shared_ptr<const MapNode>;

inline constexpr double kInfiniteScale = std::numeric_limits<double>::infinity();

/// Default finite-difference step for Jacobians of nodes without closed forms.
inline constexpr double kDefaultJacobianStep = 1e-6;

/// A primitive or composite volume-preserving map between two ambients.
///
/// Nodes are immutable once built; all member functions are const and safe to
/// call from several threads at once.
class MapNode : public std::enable_shared_from_this<MapNode> {
 public:
  MapNode(Ambient src, Ambient tgt) : src_(src), tgt_(tgt) {}
  virtual ~MapNode() = default;

  const Ambient& source() const { return src_; }
  const Ambient& target() const { return tgt_; }

  virtual std::string kind() const = 0;

  /// Image of a normalized source point, normalized into the target.
  virtual Vec apply(const Vec& x) const = 0;

  /// Derivative at x. The base version uses central differences with
  /// one-sided stencils at interval boundaries.
  virtual Mat jacobian(const Vec& x, double step) const;

  /// Closed-form inverse, or nullptr when the node has none.
  virtual NodePtr inverse() const { return nullptr; }

  virtual json to_json() const = 0;

  /// Characteristic width of the region where the map differs from identity.
  virtual double support_scale() const { return kInfiniteScale; }

  virtual bool is_identity() const { return false; }
  virtual bool volume_preserving() const { return true; }

 protected:
  json header() const { return {{"kind", kind()}, {"source", renorm::to_json(src_)}, {"target", renorm::to_json(tgt_)}}; }

 private:
  Ambient src_;
  Ambient tgt_;
};

/// Central-difference Jacobian of an arbitrary node. Output differences use
/// the shorter arc on periodic target coordinates.
inline Mat fd_jacobian(const MapNode& m, const Vec& x, double step) {
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite-difference step must be positive");
  const Ambient& s = m.source();
  const Ambient& t = m.target();
  int d = s.dim;
  Mat jac(t.dim, d);
  Vec f0;
  bool have_f0 = false;
  auto eval_at = [&](const Vec& y) {
    Vec z = y;
    normalize(s, z);
    return m.apply(z);
  };
  for (int j = 0; j < d; ++j) {
    Vec xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    bool plus_ok = contains(s, xp);
    bool minus_ok = contains(s, xm);
    if (plus_ok && minus_ok) {
      jac.col(j) = difference(t, eval_at(xp), eval_at(xm)) / (2.0 * step);
      continue;
    }
    if (!have_f0) {
      f0 = m.apply(x);
      have_f0 = true;
    }
    double sgn = plus_ok ? 1.0 : -1.0;
    Vec x1 = x, x2 = x;
    x1[j] += sgn * step;
    x2[j] += 2.0 * sgn * step;
    if (!contains(s, x1) || !contains(s, x2)) {
      throw Error(ErrorKind::DomainEscape, "finite-difference stencil does not fit in " + s.name());
    }
    Vec d1 = difference(t, eval_at(x1), f0);
    Vec d2 = difference(t, eval_at(x2), f0);
    jac.col(j) = sgn * (4.0 * d1 - d2) / (2.0 * step);
  }
  return jac;
}

inline Mat MapNode::jacobian(const Vec& x, double step) const { return fd_jacobian(*this, x, step); }

// ---------------------------------------------------------------------------
// Primitive nodes

class IdentityNode final : public MapNode {
 public:
  explicit IdentityNode(Ambient a) : MapNode(a, a) {}
  std::string kind() const override { return "Identity"; }
  Vec apply(const Vec& x) const override { return x; }
  Mat jacobian(const Vec&, double) const override { return identity(source().dim); }
  NodePtr inverse() const override { return shared_from_this(); }
  json to_json() const override { return header(); }
  bool is_identity() const override { return true; }
};

class TranslationNode final : public MapNode {
 public:
  TranslationNode(Ambient a, Vec shift) : MapNode(a, a), shift_(std::move(shift)) {
    if (shift_.size() != a.dim) throw Error(ErrorKind::AmbientMismatch, "translation vector dimension");
  }
  std::string kind() const override { return "Translation"; }
  const Vec& shift() const { return shift_; }
  Vec apply(const Vec& x) const override {
    Vec y = x + shift_;
    normalize(target(), y);
    return y;
  }
  Mat jacobian(const Vec&, double) const override { return identity(source().dim); }
  NodePtr inverse() const override { return std::make_shared<TranslationNode>(source(), Vec(-shift_)); }
  json to_json() const override {
    json j = header();
    j["shift"] = renorm::to_json(shift_);
    return j;
  }

 private:
  Vec shift_;
};

/// x -> O x + t with O orthogonal.
class IsometryNode final : public MapNode {
 public:
  IsometryNode(Ambient src, Ambient tgt, Mat orth, Vec shift)
      : MapNode(src, tgt), orth_(std::move(orth)), shift_(std::move(shift)) {
    if (orth_.rows() != tgt.dim || orth_.cols() != src.dim || shift_.size() != tgt.dim) {
      throw Error(ErrorKind::AmbientMismatch, "isometry shape does not match ambients");
    }
    if (sup_norm(Mat(orth_.transpose() * orth_ - identity(src.dim))) > 1e-14) {
      throw Error(ErrorKind::InvalidArgument, "isometry matrix is not orthogonal");
    }
  }
  IsometryNode(Ambient a, const ExactIsometry& iso) : IsometryNode(a, a, iso.orth_double(), iso.shift_double()) {}

  std::string kind() const override { return "Isometry"; }
  const Mat& orth() const { return orth_; }
  const Vec& shift() const { return shift_; }
  Vec apply(const Vec& x) const override {
    Vec y = orth_ * x + shift_;
    normalize(target(), y);
    return y;
  }
  Mat jacobian(const Vec&, double) const override { return orth_; }
  NodePtr inverse() const override {
    Mat ot = orth_.transpose();
    return std::make_shared<IsometryNode>(target(), source(), ot, Vec(-(ot * shift_)));
  }
  json to_json() const override {
    json j = header();
    j["orth"] = renorm::to_json(orth_);
    j["shift"] = renorm::to_json(shift_);
    return j;
  }

 private:
  Mat orth_;
  Vec shift_;
};

/// x -> scale * O * (x (-) anchor) + offset, where (-) is the ambient
/// difference of the source. Maps a small ball around the anchor onto a ball
/// around the offset; not volume preserving unless scale is 1.
class SimilarityNode final : public MapNode {
 public:
  SimilarityNode(Ambient src, Ambient tgt, double scale, Mat orth, Vec anchor, Vec offset)
      : MapNode(src, tgt), scale_(scale), orth_(std::move(orth)), anchor_(std::move(anchor)), offset_(std::move(offset)) {
    if (!(scale_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "similarity scale must be positive");
    if (orth_.rows() != tgt.dim || orth_.cols() != src.dim || anchor_.size() != src.dim || offset_.size() != tgt.dim) {
      throw Error(ErrorKind::AmbientMismatch, "similarity shape does not match ambients");
    }
  }

  std::string kind() const override { return "Similarity"; }
  double scale() const { return scale_; }
  const Mat& orth() const { return orth_; }
  const Vec& anchor() const { return anchor_; }
  const Vec& offset() const { return offset_; }

  Vec apply(const Vec& x) const override {
    Vec y = scale_ * (orth_ * difference(source(), x, anchor_)) + offset_;
    normalize(target(), y);
    return y;
  }
  Mat jacobian(const Vec&, double) const override { return scale_ * orth_; }
  NodePtr inverse() const override {
    Mat ot = orth_.transpose();
    return std::make_shared<SimilarityNode>(target(), source(), 1.0 / scale_, ot, offset_, anchor_);
  }
  json to_json() const override {
    json j = header();
    j["scale"] = scale_;
    j["orth"] = renorm::to_json(orth_);
    j["anchor"] = renorm::to_json(anchor_);
    j["offset"] = renorm::to_json(offset_);
    return j;
  }
  bool volume_preserving() const override { return std::abs(scale_ - 1.0) < 1e-15; }

 private:
  double scale_;
  Mat orth_;
  Vec anchor_;
  Vec offset_;
};

/// Scalar profile on an interval, with derivatives.
class Profile1D {
 public:
  virtual ~Profile1D() = default;
  virtual double derivative(double x, int n) const = 0;
  double operator()(double x) const { return derivative(x, 0); }
  /// Closed interval outside of which the profile vanishes.
  virtual double support_lo() const = 0;
  virtual double support_hi() const = 0;
  virtual json to_json() const = 0;
};

using ProfilePtr = std::shared_ptr<const Profile1D>;

/// x -> x + sign * phi(x_axis) * w with w_axis = 0, so the Jacobian is
/// unipotent and volume is preserved exactly.
class ShearNode final : public MapNode {
 public:
  ShearNode(Ambient a, ProfilePtr profile, int axis, Vec direction, double sign = 1.0)
      : MapNode(a, a), profile_(std::move(profile)), axis_(axis), dir_(std::move(direction)), sign_(sign) {
    if (axis_ < 0 || axis_ >= a.dim || dir_.size() != a.dim) throw Error(ErrorKind::AmbientMismatch, "shear shape");
    if (dir_[axis_] != 0.0) throw Error(ErrorKind::InvalidArgument, "shear direction must not move the profile axis");
  }

  std::string kind() const override { return "Shear"; }
  const Profile1D& profile() const { return *profile_; }
  const ProfilePtr& profile_ptr() const { return profile_; }
  int axis() const { return axis_; }
  const Vec& direction() const { return dir_; }
  double sign() const { return sign_; }

  Vec apply(const Vec& x) const override {
    Vec y = x + (sign_ * (*profile_)(x[axis_])) * dir_;
    normalize(target(), y);
    return y;
  }
  Mat jacobian(const Vec& x, double) const override {
    Mat j = identity(source().dim);
    j.col(axis_) += (sign_ * profile_->derivative(x[axis_], 1)) * dir_;
    return j;
  }
  NodePtr inverse() const override { return std::make_shared<ShearNode>(source(), profile_, axis_, dir_, -sign_); }
  json to_json() const override {
    json j = header();
    j["profile"] = profile_->to_json();
    j["axis"] = axis_;
    j["direction"] = renorm::to_json(dir_);
    j["sign"] = sign_;
    return j;
  }
  double support_scale() const override { return profile_->support_hi() - profile_->support_lo(); }

 private:
  ProfilePtr profile_;
  int axis_;
  Vec dir_;
  double sign_;
};

// ---------------------------------------------------------------------------
// Composite nodes

/// children[0] o children[1] o ... o children[n-1]; the last child is applied first.
class ComposeNode final : public MapNode {
 public:
  explicit ComposeNode(std::vector<NodePtr> children)
      : MapNode(children.back()->source(), children.front()->target()), children_(std::move(children)) {
    for (std::size_t i = 0; i + 1 < children_.size(); ++i) {
      if (!(children_[i]->source() == children_[i + 1]->target())) {
        throw Error(ErrorKind::AmbientMismatch, "compose: " + children_[i + 1]->target().name() + " feeds " +
                                                    children_[i]->source().name());
      }
    }
  }

  std::string kind() const override { return "Compose"; }
  const std::vector<NodePtr>& children() const { return children_; }

  Vec apply(const Vec& x) const override {
    Vec y = x;
    for (auto it = children_.rbegin(); it != children_.rend(); ++it) y = (*it)->apply(y);
    return y;
  }
  Mat jacobian(const Vec& x, double step) const override {
    Vec y = x;
    Mat acc = identity(source().dim);
    for (auto it = children_.rbegin(); it != children_.rend(); ++it) {
      acc = ((*it)->jacobian(y, step) * acc).eval();
      y = (*it)->apply(y);
    }
    return acc;
  }
  NodePtr inverse() const override;
  json to_json() const override {
    json j = header();
    j["children"] = json::array();
    for (const auto& c : children_) j["children"].push_back(c->to_json());
    return j;
  }
  double support_scale() const override {
    double s = kInfiniteScale;
    for (const auto& c : children_) s = std::min(s, c->support_scale());
    return s;
  }
  bool volume_preserving() const override {
    for (const auto& c : children_)
      if (!c->volume_preserving()) return false;
    return true;
  }

 private:
  std::vector<NodePtr> children_;
};

/// Inverse of a node without a closed form, by damped Newton iteration.
class NumericInverseNode final : public MapNode {
 public:
  static constexpr double kResidual = 1e-12;
  static constexpr int kMaxIterations = 50;

  explicit NumericInverseNode(NodePtr child) : MapNode(child->target(), child->source()), child_(std::move(child)) {
    if (!(child_->source() == child_->target())) {
      throw Error(ErrorKind::InvalidArgument, "numeric inverse needs a self-map to seed the iteration");
    }
  }

  std::string kind() const override { return "Inverse"; }
  const NodePtr& child() const { return child_; }

  Vec apply(const Vec& x) const override {
    Vec y = x;
    Vec res = difference(target(), child_->apply(y), x);
    double rn = sup_norm(res);
    for (int it = 0; it < kMaxIterations && rn > kResidual; ++it) {
      Mat j = child_->jacobian(y, kDefaultJacobianStep);
      Vec step = j.fullPivLu().solve(res);
      double lambda = 1.0;
      bool accepted = false;
      for (int k = 0; k < 30; ++k) {
        Vec cand = y - lambda * step;
        if (contains(source(), cand, -kDomainTolerance)) {
          normalize(source(), cand);
          Vec r2 = difference(target(), child_->apply(cand), x);
          double n2 = sup_norm(r2);
          if (n2 < rn || n2 <= kResidual) {
            y = cand;
            res = r2;
            rn = n2;
            accepted = true;
            break;
          }
        }
        lambda *= 0.5;
      }
      if (!accepted) break;
    }
    if (!(rn <= kResidual)) {
      throw Error(ErrorKind::InversionDiverged, "residual " + std::to_string(rn) + " after Newton iteration");
    }
    return y;
  }
  Mat jacobian(const Vec& x, double step) const override {
    Vec y = apply(x);
    return child_->jacobian(y, step).inverse();
  }
  NodePtr inverse() const override { return child_; }
  json to_json() const override {
    json j = header();
    j["child"] = child_->to_json();
    return j;
  }
  double support_scale() const override { return child_->support_scale(); }
  bool volume_preserving() const override { return child_->volume_preserving(); }

 private:
  NodePtr child_;
};

inline NodePtr inverse_of(const NodePtr& n) {
  NodePtr inv = n->inverse();
  if (inv) return inv;
  return std::make_shared<NumericInverseNode>(n);
}

inline NodePtr ComposeNode::inverse() const {
  std::vector<NodePtr> inv;
  inv.reserve(children_.size());
  for (auto it = children_.rbegin(); it != children_.rend(); ++it) inv.push_back(inverse_of(*it));
  return std::make_shared<ComposeNode>(std::move(inv));
}

// ---------------------------------------------------------------------------
// Value handle

/// Immutable handle to a map tree.
class MapExpr {
 public:
  MapExpr() = default;
  explicit MapExpr(NodePtr node) : node_(std::move(node)) {
    if (!node_) throw Error(ErrorKind::InvalidArgument, "null map node");
  }

  const MapNode& node() const { return *node_; }
  const NodePtr& ptr() const { return node_; }
  const Ambient& source() const { return node_->source(); }
  const Ambient& target() const { return node_->target(); }
  std::string kind() const { return node_->kind(); }
  bool is_identity() const { return node_->is_identity(); }
  json to_json() const { return node_->to_json(); }

  Vec operator()(const Vec& x) const {
    Vec y = x;
    normalize(source(), y);
    return node_->apply(y);
  }

 private:
  NodePtr node_;
};

inline MapExpr identity_map(const Ambient& a) { return MapExpr(std::make_shared<IdentityNode>(a)); }

inline MapExpr translation(const Ambient& a, const Vec& shift) {
  if (sup_norm(shift) == 0.0) return identity_map(a);
  return MapExpr(std::make_shared<TranslationNode>(a, shift));
}

inline MapExpr isometry(const Ambient& a, const ExactIsometry& iso) {
  return MapExpr(std::make_shared<IsometryNode>(a, iso));
}

inline MapExpr similarity(const Ambient& src, const Ambient& tgt, double scale, const Mat& orth, const Vec& anchor,
                          const Vec& offset) {
  return MapExpr(std::make_shared<SimilarityNode>(src, tgt, scale, orth, anchor, offset));
}

/// Builds maps[0] o maps[1] o ... ; identities are dropped and an empty
/// result collapses to Identity.
inline MapExpr compose(const std::vector<MapExpr>& maps) {
  if (maps.empty()) throw Error(ErrorKind::InvalidArgument, "compose of nothing");
  std::vector<NodePtr> kept;
  for (std::size_t i = 0; i + 1 < maps.size(); ++i) {
    if (!(maps[i].source() == maps[i + 1].target())) {
      throw Error(ErrorKind::AmbientMismatch,
                  "compose: " + maps[i + 1].target().name() + " feeds " + maps[i].source().name());
    }
  }
  for (const auto& m : maps) {
    if (m.is_identity()) continue;
    if (m.kind() == "Compose") {
      for (const auto& c : static_cast<const ComposeNode&>(m.node()).children()) kept.push_back(c);
    } else {
      kept.push_back(m.ptr());
    }
  }
  if (kept.empty()) return identity_map(maps.back().source());
  if (kept.size() == 1) return MapExpr(kept.front());
  return MapExpr(std::make_shared<ComposeNode>(std::move(kept)));
}

inline MapExpr compose(const MapExpr& a, const MapExpr& b) { return compose(std::vector<MapExpr>{a, b}); }

// ---------------------------------------------------------------------------
// Operations

inline void check_source(const MapExpr& m, const Point& p) {
  if (!(p.ambient == m.source())) {
    throw Error(ErrorKind::AmbientMismatch, "point in " + p.ambient.name() + ", map expects " + m.source().name());
  }
}

inline Point evaluate(const MapExpr& m, const Point& p) {
  check_source(m, p);
  Vec y = m.node().apply(p.x);
  Point out;
  out.x = std::move(y);
  out.ambient = m.target();
  normalize(out.ambient, out.x);
  return out;
}

inline MapExpr invert(const MapExpr& m) { return MapExpr(inverse_of(m.ptr())); }

inline Mat jacobian(const MapExpr& m, const Point& p, double step = kDefaultJacobianStep) {
  check_source(m, p);
  if (!(step > 1e-7 && step < 1e-3)) {
    throw Error(ErrorKind::InvalidArgument, "finite-difference step must lie in (1e-7, 1e-3)");
  }
  return m.node().jacobian(p.x, step);
}

}  // namespace renorm
