#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "renorm/ambient.hpp"
#include "renorm/rational.hpp"

namespace renorm {

using json = nlohmann::json;

inline json to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Mat& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

inline Vec vec_from_json(const json& j) {
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

inline Mat mat_from_json(const json& j) {
  int n = static_cast<int>(j.size());
  int m = n == 0 ? 0 : static_cast<int>(j[0].size());
  Mat out(n, m);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < m; ++k) out(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  return out;
}

inline json to_json(const Rational& r) { return json::array({r.numerator(), r.denominator()}); }

inline Rational rational_from_json(const json& j) {
  return Rational(j.at(0).get<std::int64_t>(), j.at(1).get<std::int64_t>());
}

inline json to_json(const ExactIsometry& iso) {
  json o = json::array();
  for (int i = 0; i < iso.dim(); ++i) {
    json row = json::array();
    for (int k = 0; k < iso.dim(); ++k) row.push_back(iso.orth(i, k));
    o.push_back(row);
  }
  json t = json::array();
  for (const auto& s : iso.shift) t.push_back(to_json(s));
  return {{"orth", o}, {"shift", t}};
}

inline ExactIsometry isometry_from_json(const json& j) {
  const json& o = j.at("orth");
  int d = static_cast<int>(o.size());
  ExactIsometry iso = ExactIsometry::identity(d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) iso.orth(i, k) = o[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<int>();
  for (int i = 0; i < d; ++i) iso.shift[static_cast<std::size_t>(i)] = rational_from_json(j.at("shift")[static_cast<std::size_t>(i)]);
  return iso;
}

inline json to_json(const Ambient& a) {
  const char* k = "FatTorus";
  switch (a.kind) {
    case AmbientKind::Ball: k = "Ball"; break;
    case AmbientKind::FatTorus: k = "FatTorus"; break;
    case AmbientKind::LongFatTorus: k = "LongFatTorus"; break;
    case AmbientKind::Torus: k = "Torus"; break;
  }
  json j = {{"kind", k}, {"dim", a.dim}};
  if (a.kind == AmbientKind::LongFatTorus) j["q"] = a.q;
  return j;
}

inline Ambient ambient_from_json(const json& j) {
  std::string k = j.at("kind").get<std::string>();
  int d = j.at("dim").get<int>();
  if (k == "Ball") return Ambient::ball(d);
  if (k == "FatTorus") return Ambient::fat_torus(d);
  if (k == "LongFatTorus") return Ambient::long_fat_torus(d, j.at("q").get<int>());
  if (k == "Torus") return Ambient::torus(d);
  throw Error(ErrorKind::InvalidArgument, "unknown ambient kind " + k);
}

}  // namespace renorm
