#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ivdnet/volume.hpp"

namespace ivdnet::metrics {

/// Dice similarity coefficient 2|A∩B| / (|A| + |B|) of two binary masks
/// (any nonzero voxel counts as foreground). Two empty masks score 1.
double dsc(const LabelVolume& ref, const LabelVolume& automatic);

using Voxel = std::array<int, 3>;  // (z, y, x)
using Point3 = std::array<double, 3>;

/// Labeled components: `labels` holds 0 for background and 1..count for
/// foreground. Labels are assigned in raster order of each component's first
/// voxel.
struct Components {
  Volume<std::int32_t> labels;
  int count = 0;

  std::vector<std::vector<Voxel>> voxel_lists() const;
};

/// 26-connected component labeling.
Components connected_components(const LabelVolume& mask);

/// Mean voxel index coordinate. Throws ValidationError for an empty list.
Point3 barycenter(std::span<const Voxel> voxels);

double euclidean(const Point3& a, const Point3& b);

struct MatchedPair {
  int ref_component;   // 1-based component label in the reference mask
  int auto_component;  // 1-based component label in the automatic mask
  double distance;     // voxels
};

struct Localization {
  std::vector<MatchedPair> pairs;
  int misses = 0;           // reference components left unmatched
  int false_positives = 0;  // automatic components left unmatched
  int reference_count = 0;
  int automatic_count = 0;
  double mean_distance = 0.0;  // over matched pairs; NaN when nothing matched
};

/// Greedy nearest-barycenter matching: all candidate pairs are visited in
/// ascending distance (ties by reference then automatic label) and each
/// component is used at most once. Throws ValidationError on shape mismatch
/// or when the reference has no component.
Localization localization_distance(const LabelVolume& ref, const LabelVolume& automatic);

struct EvalReport {
  std::string subject;
  double dsc = 0.0;
  Localization localization;

  int matched() const { return static_cast<int>(localization.pairs.size()); }
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  std::size_t count = 0;
};

MeanStd mean_std(std::span<const double> values);

struct Aggregate {
  MeanStd dsc;
  MeanStd distance;  // over subject-level mean distances
  MeanStd pair_distance;  // over all matched pairs of all subjects
  int misses = 0;
  int false_positives = 0;
};

Aggregate aggregate(std::span<const EvalReport> reports);

EvalReport evaluate_masks(const std::string& subject, const LabelVolume& ref,
                          const LabelVolume& automatic);

/// "0.9162 ± 0.0192"
std::string format_mean_std(const MeanStd& value, int precision = 4);

}  // namespace ivdnet::metrics
