#pragma once

// Brute-force reference implementations used only by the tests. They are
// written for obviousness, not speed, and share no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "ivdnet/connectivity.hpp"
#include "ivdnet/volume.hpp"

namespace ivdnet::oracle {

// Connectivity ---------------------------------------------------------------

/// Every (stream, layer) map that layer `l` of `stream` concatenates, listed
/// straight from the definition of each mode.
inline std::multiset<std::pair<int, int>> enumerate_sources(int M, int L, plan::ConnectivityMode mode,
                                                            int l, int stream) {
  std::multiset<std::pair<int, int>> out;
  if (l == L + 1) {  // bridge
    for (int s = 1; s <= M; ++s)
      for (int k = 1; k <= L; ++k) {
        const bool take = mode == plan::ConnectivityMode::plain ? k == L : true;
        if (take) out.insert({s, k});
      }
    return out;
  }
  if (l == 1) {
    out.insert({stream, 0});
    return out;
  }
  for (int s = 1; s <= M; ++s)
    for (int k = 1; k < l; ++k) {
      bool take = false;
      switch (mode) {
        case plan::ConnectivityMode::plain: take = s == stream && k == l - 1; break;
        case plan::ConnectivityMode::dense_within_stream: take = s == stream; break;
        case plan::ConnectivityMode::hyper_dense: take = true; break;
      }
      if (take) out.insert({s, k});
    }
  return out;
}

inline int enumerated_channels(const std::multiset<std::pair<int, int>>& sources, const std::vector<int>& growth,
                               int raw_channels) {
  int total = 0;
  for (const auto& [s, k] : sources) total += k == 0 ? raw_channels : growth[k - 1];
  return total;
}

// Masks ----------------------------------------------------------------------

inline LabelVolume random_mask(std::mt19937_64& rng, Shape3 shape, double density) {
  std::bernoulli_distribution on(density);
  LabelVolume v(shape);
  for (auto& x : v.storage()) x = on(rng) ? 1 : 0;
  return v;
}

/// Sets an axis-aligned box (inclusive bounds).
inline void fill_box(LabelVolume& v, std::array<int, 3> lo, std::array<int, 3> hi) {
  for (int z = lo[0]; z <= hi[0]; ++z)
    for (int y = lo[1]; y <= hi[1]; ++y)
      for (int x = lo[2]; x <= hi[2]; ++x) v(z, y, x) = 1;
}

inline double brute_dsc(const LabelVolume& a, const LabelVolume& b) {
  long long na = 0, nb = 0, both = 0;
  for (int z = 0; z < a.shape().depth; ++z)
    for (int y = 0; y < a.shape().height; ++y)
      for (int x = 0; x < a.shape().width; ++x) {
        const bool pa = a(z, y, x) != 0, pb = b(z, y, x) != 0;
        na += pa;
        nb += pb;
        both += pa && pb;
      }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

struct FloodFill {
  Volume<std::int32_t> labels;  // 0 background, 1.. in order of first raster visit
  int count = 0;
};

/// Breadth-first flood fill over the 26-neighbourhood.
inline FloodFill flood_fill(const LabelVolume& mask) {
  const auto sh = mask.shape();
  FloodFill f{Volume<std::int32_t>(sh), 0};
  for (int z = 0; z < sh.depth; ++z)
    for (int y = 0; y < sh.height; ++y)
      for (int x = 0; x < sh.width; ++x) {
        if (!mask(z, y, x) || f.labels(z, y, x)) continue;
        const int id = ++f.count;
        std::deque<std::array<int, 3>> queue{{z, y, x}};
        f.labels(z, y, x) = id;
        while (!queue.empty()) {
          auto [cz, cy, cx] = queue.front();
          queue.pop_front();
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int nz = cz + dz, ny = cy + dy, nx = cx + dx;
                if (nz < 0 || ny < 0 || nx < 0 || nz >= sh.depth || ny >= sh.height || nx >= sh.width) continue;
                if (!mask(nz, ny, nx) || f.labels(nz, ny, nx)) continue;
                f.labels(nz, ny, nx) = id;
                queue.push_back({nz, ny, nx});
              }
        }
      }
  return f;
}

/// True when the two labelings induce the same partition of the voxels.
inline bool same_partition(const Volume<std::int32_t>& a, const Volume<std::int32_t>& b) {
  std::map<std::int32_t, std::int32_t> ab, ba;
  for (std::size_t i = 0; i < a.storage().size(); ++i) {
    const auto la = a.storage()[i], lb = b.storage()[i];
    if ((la == 0) != (lb == 0)) return false;
    if (la == 0) continue;
    auto [ia, inserted_a] = ab.emplace(la, lb);
    auto [ib, inserted_b] = ba.emplace(lb, la);
    if (ia->second != lb || ib->second != la) return false;
  }
  return true;
}

/// Barycenters indexed by flood-fill label - 1, from explicit coordinate sums.
inline std::vector<std::array<double, 3>> brute_barycenters(const FloodFill& f) {
  std::vector<std::array<double, 3>> sum(f.count, {0, 0, 0});
  std::vector<double> n(f.count, 0);
  const auto sh = f.labels.shape();
  for (int z = 0; z < sh.depth; ++z)
    for (int y = 0; y < sh.height; ++y)
      for (int x = 0; x < sh.width; ++x)
        if (int id = f.labels(z, y, x)) {
          sum[id - 1][0] += z;
          sum[id - 1][1] += y;
          sum[id - 1][2] += x;
          n[id - 1] += 1;
        }
  for (int i = 0; i < f.count; ++i)
    for (auto& c : sum[i]) c /= n[i];
  return sum;
}

struct BruteLocalization {
  std::vector<double> distances;  // ascending
  int misses = 0;
  int false_positives = 0;
};

/// Greedy matching by repeatedly taking the globally closest unused pair.
inline BruteLocalization brute_localization(const LabelVolume& ref, const LabelVolume& automatic) {
  const auto r = brute_barycenters(flood_fill(ref));
  const auto a = brute_barycenters(flood_fill(automatic));
  std::vector<bool> used_r(r.size()), used_a(a.size());
  BruteLocalization out;
  while (true) {
    double best = INFINITY;
    int bi = -1, bj = -1;
    for (std::size_t i = 0; i < r.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) {
        if (used_r[i] || used_a[j]) continue;
        const double d = std::sqrt(std::pow(r[i][0] - a[j][0], 2) + std::pow(r[i][1] - a[j][1], 2) +
                                   std::pow(r[i][2] - a[j][2], 2));
        if (d < best) best = d, bi = static_cast<int>(i), bj = static_cast<int>(j);
      }
    if (bi < 0) break;
    used_r[bi] = used_a[bj] = true;
    out.distances.push_back(best);
  }
  out.misses = static_cast<int>(std::count(used_r.begin(), used_r.end(), false));
  out.false_positives = static_cast<int>(std::count(used_a.begin(), used_a.end(), false));
  std::sort(out.distances.begin(), out.distances.end());
  return out;
}

}  // namespace ivdnet::oracle
