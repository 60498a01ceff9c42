#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "renorm/json_util.hpp"

namespace renorm {

namespace detail {

inline std::string svg_open(double w, double h) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << ' ' << h
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

}  // namespace detail

/// Tower discs of a d = 2 artifact. Isometric times are blue, the rest
/// orange. An artifact without tower data gives an empty frame.
inline std::string tower_svg(const json& doc, double size = 600.0) {
  std::ostringstream os;
  os << detail::svg_open(size, size);
  bool ball = doc.contains("chart") && doc["chart"].value("mode", "") == "BallAmbient";
  // ambient box: [0,1]^2 for the fat torus, [-1,1]^2 around the ball
  double lo = ball ? -1.0 : 0.0, hi = 1.0;
  double s = size / (hi - lo);
  auto X = [&](double x) { return (x - lo) * s; };
  auto Y = [&](double y) { return size - (y - lo) * s; };
  if (ball) os << "<circle cx=\"" << X(0) << "\" cy=\"" << Y(0) << "\" r=\"" << s << "\" fill=\"none\" stroke=\"black\"/>\n";
  else os << "<rect x=\"0\" y=\"0\" width=\"" << size << "\" height=\"" << size << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (doc.contains("tower")) {
    const json& t = doc["tower"];
    Rational r = rational_from_json(t.at("rho"));
    double rho = static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
    const json& cs = t.at("centres");
    const json& iso = t.at("isometric");
    for (std::size_t n = 0; n < cs.size(); ++n) {
      Vec c = vec_from_json(cs[n]);
      bool flag = iso[n].get<int>() != 0;
      os << "<circle cx=\"" << X(c[0]) << "\" cy=\"" << Y(c[1]) << "\" r=\"" << rho * s << "\" fill=\""
         << (flag ? "steelblue" : "orange") << "\" fill-opacity=\"0.6\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

/// Rows (kind, A, q, norm, predicted). Scaling-study artifacts list their
/// run matrix; other artifacts give their own measured norms.
inline json scaling_rows(const json& doc) {
  json rows = json::array();
  if (doc.contains("scaling")) {
    for (const char* kind : {"T", "Fbar", "nrt"}) {
      for (const auto& r : doc["scaling"][kind]) {
        rows.push_back({{"kind", kind}, {"A", r["A"]}, {"q", r.value("q", 0)}, {"norm", r["norm"]}, {"predicted", r["predicted"]}});
      }
    }
  } else if (doc.contains("measured") && doc.contains("params")) {
    const json& p = doc["params"];
    double A = p["A"].get<double>(), q = p["q"].get<double>();
    int d = p["d"].get<int>();
    rows.push_back({{"kind", "Fbar"}, {"A", p["A"]}, {"q", p["q"]}, {"norm", doc["measured"]["Fbar_C1"]},
                    {"predicted", 1.0 / (std::pow(A, d - 1) * q)}});
    if (doc["measured"].contains("T_C1")) {
      rows.push_back({{"kind", "T"}, {"A", p["A"]}, {"q", p["q"]}, {"norm", doc["measured"]["T_C1"]}, {"predicted", 1.0 / A}});
    }
  }
  return rows;
}

inline std::string scaling_csv(const json& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "kind,A,q,norm,predicted\n";
  for (const auto& r : rows) {
    os << r["kind"].get<std::string>() << ',' << r["A"].get<long long>() << ',' << r["q"].get<int>() << ','
       << r["norm"].get<double>() << ',' << r["predicted"].get<double>() << '\n';
  }
  return os.str();
}

/// Log-log scatter of measured norm against prediction, one colour per kind.
inline std::string scaling_svg(const json& rows, double size = 480.0) {
  std::ostringstream os;
  os << detail::svg_open(size, size);
  double pad = 40.0;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& r : rows) {
    double x = std::log10(r["predicted"].get<double>()), y = std::log10(std::max(1e-300, r["norm"].get<double>()));
    xlo = std::min(xlo, x);
    xhi = std::max(xhi, x);
    ylo = std::min(ylo, y);
    yhi = std::max(yhi, y);
  }
  os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << size - 2 * pad << "\" height=\"" << size - 2 * pad
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!rows.empty()) {
    double xs = xhi > xlo ? xhi - xlo : 1.0, ys = yhi > ylo ? yhi - ylo : 1.0;
    for (const auto& r : rows) {
      double x = std::log10(r["predicted"].get<double>()), y = std::log10(std::max(1e-300, r["norm"].get<double>()));
      std::string k = r["kind"].get<std::string>();
      const char* col = k == "T" ? "black" : k == "Fbar" ? "steelblue" : "firebrick";
      os << "<circle cx=\"" << pad + (x - xlo) / xs * (size - 2 * pad) << "\" cy=\"" << size - pad - (y - ylo) / ys * (size - 2 * pad)
         << "\" r=\"4\" fill=\"" << col << "\"><title>" << k << " A=" << r["A"].get<long long>() << " q=" << r["q"].get<int>()
         << "</title></circle>\n";
    }
  }
  os << "<text x=\"" << size / 2 << "\" y=\"" << size - 8 << "\" text-anchor=\"middle\" font-size=\"12\">log10 predicted</text>\n";
  os << "<text x=\"12\" y=\"" << size / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << size / 2 << ")\">log10 norm</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace renorm
