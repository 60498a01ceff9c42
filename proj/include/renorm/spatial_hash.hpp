#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "renorm/ambient.hpp"

namespace renorm {

/// Bucket grid over an ambient with cells of side >= `cell`, wrapping on
/// periodic coordinates. Lookups visit the 3^d neighbouring cells, so every
/// stored point within distance `cell` of a query is reported.
class SpatialHash {
 public:
  SpatialHash(const Ambient& a, double cell) : a_(a) {
    for (int j = 0; j < a.dim; ++j) {
      double extent = a.periodic(j) ? a.period(j) : a.hi(j) - a.lo(j);
      std::int64_t n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(extent / cell)));
      ncell_.push_back(n);
      width_.push_back(extent / static_cast<double>(n));
    }
  }

  void insert(std::size_t id, const Vec& x) { buckets_[key(cell_of(x))].push_back(id); }

  /// Calls fn(id) for every stored id whose cell neighbours the cell of x.
  template <class Fn>
  void for_each_near(const Vec& x, Fn&& fn) const {
    int d = a_.dim;
    auto k = cell_of(x);
    int neigh = 1;
    for (int j = 0; j < d; ++j) neigh *= 3;
    std::vector<std::int64_t> seen;
    for (int m = 0; m < neigh; ++m) {
      std::vector<std::int64_t> kk = k;
      int rem = m;
      bool skip = false;
      for (int j = 0; j < d; ++j) {
        auto ju = static_cast<std::size_t>(j);
        std::int64_t v = kk[ju] + (rem % 3) - 1;
        rem /= 3;
        std::int64_t n = ncell_[ju];
        if (a_.periodic(j)) v = ((v % n) + n) % n;
        else if (v < 0 || v >= n) skip = true;
        kk[ju] = v;
      }
      if (skip) continue;
      std::uint64_t h = key(kk);
      // small periods make several offsets land on the same cell
      if (std::find(seen.begin(), seen.end(), static_cast<std::int64_t>(h)) != seen.end()) continue;
      seen.push_back(static_cast<std::int64_t>(h));
      auto it = buckets_.find(h);
      if (it == buckets_.end()) continue;
      for (std::size_t id : it->second) fn(id);
    }
  }

 private:
  std::vector<std::int64_t> cell_of(const Vec& x) const {
    std::vector<std::int64_t> k(static_cast<std::size_t>(a_.dim));
    for (int j = 0; j < a_.dim; ++j) {
      auto ju = static_cast<std::size_t>(j);
      k[ju] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((x[j] - a_.lo(j)) / width_[ju])), 0, ncell_[ju] - 1);
    }
    return k;
  }

  static std::uint64_t key(const std::vector<std::int64_t>& k) {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ULL;
    return h;
  }

  Ambient a_;
  std::vector<std::int64_t> ncell_;
  std::vector<double> width_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace renorm
