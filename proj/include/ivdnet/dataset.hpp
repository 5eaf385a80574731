#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ivdnet/volume.hpp"

namespace ivdnet::data {

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Subject-level shuffle-and-cut. The training share is
/// round(train_fraction * n), clamped so both sides keep at least one
/// subject. Throws ValidationError for fewer than two subjects or a fraction
/// outside (0, 1).
Split split_dataset(std::span<const std::string> subjects, double train_fraction,
                    std::uint64_t seed);

}  // namespace ivdnet::data

namespace ivdnet::io {

// Single-file NIfTI-1 (.nii). Writes float32 images and uint8 labels;
// reads uint8/int16/int32/float32/float64 with scl_slope/scl_inter applied.
// NIfTI axes (i, j, k) map to (width, height, depth).
void write_nifti(const std::filesystem::path& path, const Volume<float>& volume);
void write_nifti(const std::filesystem::path& path, const LabelVolume& volume);
Volume<float> read_nifti(const std::filesystem::path& path);
/// Reads a volume and binarizes it (nonzero -> 1).
LabelVolume read_nifti_label(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  Shape3 shape;
  Spacing spacing;
  std::vector<std::string> modality_files;  // parallel to Manifest::modalities
  std::optional<std::string> label_file;
};

/// JSON index of a dataset directory. File names are relative to the
/// manifest's directory.
struct Manifest {
  std::vector<std::string> modalities;
  std::vector<ManifestEntry> subjects;

  const ManifestEntry& find(const std::string& id) const;
  std::vector<std::string> subject_ids() const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Loads every modality and (when present) the label of one subject.
Subject load_subject(const std::filesystem::path& manifest_path, const Manifest& manifest,
                     const std::string& id);

/// Writes `subject` as <dir>/<id>_<modality>.nii plus <id>_label.nii and
/// returns the manifest entry describing it.
ManifestEntry save_subject(const std::filesystem::path& dir, const Subject& subject,
                           bool with_label = true);

}  // namespace ivdnet::io
