#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ivdnet/volume.hpp"

namespace ivdnet::data {

/// Tissue classes rendered by the phantom. Only `disc` is labelled.
enum class Tissue : std::uint8_t { air = 0, soft = 1, vertebra = 2, disc = 3, csf = 4 };
inline constexpr int kTissueCount = 5;

/// How one pseudo-modality maps tissue to intensity.
struct ModalityProfile {
  std::string name;
  std::array<double, kTissueCount> intensity{};  // indexed by Tissue
  double gamma = 1.0;            // monotone transfer curve applied to the tissue intensity
  double noise_sigma = 0.05;     // additive Gaussian noise
  double bias_amplitude = 0.2;   // multiplicative low-frequency bias field
  double texture_amplitude = 0.05;
  bool enabled = true;           // a disabled modality renders as all zeros
};

/// Four profiles standing in for in-phase, opposed-phase, fat and water
/// images. Each one confuses the disc with some other tissue, so the disc
/// is only unambiguous when modalities are combined.
std::vector<ModalityProfile> default_profiles();

struct DiscGeometry {
  double center_z, center_y, center_x;
  double radius_z, radius_y, radius_x;
};

struct Phantom {
  std::vector<ModalityVolume> modalities;  // normalized to [0, 1]
  LabelVolume label;                       // 1 inside a disc
  std::vector<DiscGeometry> discs;
};

/// Renders `num_discs` ellipsoidal discs stacked along the height axis with
/// vertebral bodies in between, a CSF canal behind them and a soft-tissue
/// body around them. Geometry depends only on (seed, num_discs, shape);
/// profiles only affect intensities. Throws ValidationError when the discs
/// cannot be placed with at least one empty row between neighbours.
Phantom generate_phantom(std::uint64_t seed, int num_discs, Shape3 shape,
                         std::span<const ModalityProfile> profiles);

/// Affine map of [min, max] onto [0, 1]; a constant volume maps to zeros.
Volume<float> normalize(const Volume<float>& volume);

/// Builds a Subject from a phantom.
Subject to_subject(std::string id, Phantom phantom);

}  // namespace ivdnet::data
