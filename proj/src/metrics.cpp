#include "ivdnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace ivdnet::metrics {

namespace {

void require_same_shape(const LabelVolume& a, const LabelVolume& b) {
  if (a.shape() != b.shape())
    throw ValidationError("mask shapes differ: " + to_string(a.shape()) + " vs " +
                          to_string(b.shape()));
}

class DisjointSet {
public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent_[b] = a;
    else parent_[a] = b;
  }
  std::size_t size() const { return parent_.size(); }

private:
  std::vector<int> parent_;
};

}  // namespace

double dsc(const LabelVolume& ref, const LabelVolume& automatic) {
  require_same_shape(ref, automatic);
  std::size_t inter = 0, n_ref = 0, n_auto = 0;
  const auto a = ref.data();
  const auto b = automatic.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool ra = a[i] != 0, rb = b[i] != 0;
    n_ref += ra;
    n_auto += rb;
    inter += ra && rb;
  }
  if (n_ref + n_auto == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(n_ref + n_auto);
}

std::vector<std::vector<Voxel>> Components::voxel_lists() const {
  std::vector<std::vector<Voxel>> lists(count);
  const Shape3 s = labels.shape();
  for (int z = 0; z < s.depth; ++z)
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        if (const int l = labels(z, y, x); l > 0) lists[l - 1].push_back({z, y, x});
  return lists;
}

Components connected_components(const LabelVolume& mask) {
  const Shape3 s = mask.shape();
  Components out{Volume<std::int32_t>(s, 0, mask.spacing()), 0};
  auto& provisional = out.labels;
  DisjointSet sets;
  sets.make();  // slot 0 is background

  // First pass: provisional labels, merging with the 13 already-visited
  // neighbours of the 26-neighbourhood.
  for (int z = 0; z < s.depth; ++z) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        if (mask(z, y, x) == 0) continue;
        int label = 0;
        for (int dz = -1; dz <= 0; ++dz) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
              const int nz = z + dz, ny = y + dy, nx = x + dx;
              if (nz < 0 || ny < 0 || ny >= s.height || nx < 0 || nx >= s.width) continue;
              const int n = provisional(nz, ny, nx);
              if (n == 0) continue;
              if (label == 0) label = n;
              else sets.unite(label, n);
            }
          }
        }
        provisional(z, y, x) = label != 0 ? label : sets.make();
      }
    }
  }

  // Second pass: resolve to roots and renumber in raster order.
  std::vector<int> final_label(sets.size(), 0);
  for (auto& v : provisional.storage()) {
    if (v == 0) continue;
    const int root = sets.find(v);
    if (final_label[root] == 0) final_label[root] = ++out.count;
    v = final_label[root];
  }
  return out;
}

Point3 barycenter(std::span<const Voxel> voxels) {
  if (voxels.empty()) throw ValidationError("barycenter of an empty component");
  Point3 sum{0.0, 0.0, 0.0};
  for (const auto& v : voxels)
    for (int i = 0; i < 3; ++i) sum[i] += v[i];
  const double n = static_cast<double>(voxels.size());
  return {sum[0] / n, sum[1] / n, sum[2] / n};
}

double euclidean(const Point3& a, const Point3& b) {
  const double dz = a[0] - b[0], dy = a[1] - b[1], dx = a[2] - b[2];
  return std::sqrt(dz * dz + dy * dy + dx * dx);
}

namespace {

std::vector<Point3> component_barycenters(const Components& c) {
  std::vector<Point3> sums(c.count, Point3{0, 0, 0});
  std::vector<std::size_t> counts(c.count, 0);
  const Shape3 s = c.labels.shape();
  for (int z = 0; z < s.depth; ++z)
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x)
        if (const int l = c.labels(z, y, x); l > 0) {
          sums[l - 1][0] += z;
          sums[l - 1][1] += y;
          sums[l - 1][2] += x;
          ++counts[l - 1];
        }
  for (int i = 0; i < c.count; ++i)
    for (auto& v : sums[i]) v /= static_cast<double>(counts[i]);
  return sums;
}

}  // namespace

Localization localization_distance(const LabelVolume& ref, const LabelVolume& automatic) {
  require_same_shape(ref, automatic);
  const auto ref_c = connected_components(ref);
  if (ref_c.count == 0) throw ValidationError("reference mask has no components");
  const auto auto_c = connected_components(automatic);
  const auto ref_b = component_barycenters(ref_c);
  const auto auto_b = component_barycenters(auto_c);

  std::vector<MatchedPair> candidates;
  candidates.reserve(static_cast<std::size_t>(ref_c.count) * auto_c.count);
  for (int i = 0; i < ref_c.count; ++i)
    for (int j = 0; j < auto_c.count; ++j)
      candidates.push_back({i + 1, j + 1, euclidean(ref_b[i], auto_b[j])});
  std::sort(candidates.begin(), candidates.end(), [](const MatchedPair& a, const MatchedPair& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.ref_component != b.ref_component) return a.ref_component < b.ref_component;
    return a.auto_component < b.auto_component;
  });

  Localization out;
  out.reference_count = ref_c.count;
  out.automatic_count = auto_c.count;
  std::vector<bool> ref_used(ref_c.count, false), auto_used(auto_c.count, false);
  for (const auto& c : candidates) {
    if (ref_used[c.ref_component - 1] || auto_used[c.auto_component - 1]) continue;
    ref_used[c.ref_component - 1] = auto_used[c.auto_component - 1] = true;
    out.pairs.push_back(c);
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const MatchedPair& a, const MatchedPair& b) { return a.ref_component < b.ref_component; });

  const int matched = static_cast<int>(out.pairs.size());
  out.misses = ref_c.count - matched;
  out.false_positives = auto_c.count - matched;
  if (matched == 0) {
    out.mean_distance = std::numeric_limits<double>::quiet_NaN();
  } else {
    double total = 0.0;
    for (const auto& p : out.pairs) total += p.distance;
    out.mean_distance = total / matched;
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  r.count = values.size();
  if (values.empty()) {
    r.mean = r.std = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

Aggregate aggregate(std::span<const EvalReport> reports) {
  Aggregate a;
  std::vector<double> dscs, dists, pairs;
  for (const auto& r : reports) {
    dscs.push_back(r.dsc);
    if (!std::isnan(r.localization.mean_distance)) dists.push_back(r.localization.mean_distance);
    for (const auto& p : r.localization.pairs) pairs.push_back(p.distance);
    a.misses += r.localization.misses;
    a.false_positives += r.localization.false_positives;
  }
  a.dsc = mean_std(dscs);
  a.distance = mean_std(dists);
  a.pair_distance = mean_std(pairs);
  return a;
}

EvalReport evaluate_masks(const std::string& subject, const LabelVolume& ref,
                          const LabelVolume& automatic) {
  EvalReport r;
  r.subject = subject;
  r.dsc = dsc(ref, automatic);
  r.localization = localization_distance(ref, automatic);
  return r;
}

std::string format_mean_std(const MeanStd& value, int precision) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", precision, value.mean, precision, value.std);
  return buf;
}

}  // namespace ivdnet::metrics
