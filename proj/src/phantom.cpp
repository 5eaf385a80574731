#include "ivdnet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ivdnet::data {

std::vector<ModalityProfile> default_profiles() {
  //                                   air   soft  vert  disc  csf
  return {
      {"in_phase", {0.02, 0.45, 0.58, 0.62, 0.72}, 1.0, 0.05, 0.20, 0.04, true},
      {"opposed_phase", {0.02, 0.32, 0.22, 0.52, 0.60}, 0.8, 0.05, 0.15, 0.04, true},
      {"fat", {0.02, 0.72, 0.66, 0.16, 0.12}, 1.3, 0.05, 0.25, 0.05, true},
      {"water", {0.02, 0.26, 0.20, 0.76, 0.92}, 1.1, 0.05, 0.20, 0.04, true},
  };
}

namespace {

class Uniform {
public:
  explicit Uniform(std::mt19937_64& rng) : rng_(rng) {}
  double operator()(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }

private:
  std::mt19937_64& rng_;
};

struct RowRange {
  int first;
  int last;
  bool empty() const { return last < first; }
};

RowRange occupied(double center, double radius) {
  return {static_cast<int>(std::ceil(center - radius)),
          static_cast<int>(std::floor(center + radius))};
}

bool inside_extent(RowRange r, int size) { return !r.empty() && r.first >= 0 && r.last < size; }

std::vector<DiscGeometry> place_discs(std::mt19937_64& rng, int num_discs, Shape3 shape) {
  if (num_discs < 1) throw ValidationError("num_discs must be >= 1");
  if (shape.depth < 1 || shape.height < 1 || shape.width < 1)
    throw ValidationError("phantom shape must be positive, got " + to_string(shape));

  Uniform uniform(rng);
  const double margin = 0.06 * shape.height;
  const double pitch = (shape.height - 2.0 * margin) / num_discs;

  std::vector<DiscGeometry> discs;
  discs.reserve(num_discs);
  for (int k = 0; k < num_discs; ++k) {
    DiscGeometry d{};
    d.center_y = margin + (k + 0.5) * pitch + uniform(-0.06, 0.06) * pitch;
    d.radius_y = pitch * uniform(0.16, 0.22);
    const double curve = std::sin(std::numbers::pi * (k + 0.5) / num_discs);
    d.center_x = shape.width * (0.45 + 0.05 * curve + uniform(-0.01, 0.01));
    d.radius_x = shape.width * uniform(0.09, 0.12);
    d.center_z = (shape.depth - 1) / 2.0 + uniform(-0.04, 0.04) * shape.depth;
    d.radius_z = std::max(1.0, shape.depth * uniform(0.28, 0.34));
    discs.push_back(d);
  }

  for (std::size_t k = 0; k < discs.size(); ++k) {
    const auto& d = discs[k];
    const auto ry = occupied(d.center_y, d.radius_y);
    if (d.radius_y < 1.5 || !inside_extent(ry, shape.height) ||
        !inside_extent(occupied(d.center_x, d.radius_x), shape.width) ||
        !inside_extent(occupied(d.center_z, d.radius_z), shape.depth))
      throw ValidationError("volume " + to_string(shape) + " is too small for " +
                            std::to_string(num_discs) + " discs");
    if (k + 1 < discs.size()) {
      const auto next = occupied(discs[k + 1].center_y, discs[k + 1].radius_y);
      if (next.first - ry.last < 2)
        throw ValidationError("discs overlap in volume " + to_string(shape) +
                              "; reduce num_discs or enlarge the height");
    }
  }
  return discs;
}

double ellipsoid(const DiscGeometry& d, int z, int y, int x) {
  const double dz = (z - d.center_z) / d.radius_z;
  const double dy = (y - d.center_y) / d.radius_y;
  const double dx = (x - d.center_x) / d.radius_x;
  return dz * dz + dy * dy + dx * dx;
}

Volume<std::uint8_t> tissue_map(const std::vector<DiscGeometry>& discs, Shape3 shape) {
  Volume<std::uint8_t> tissue(shape, static_cast<std::uint8_t>(Tissue::air));

  // The spine axis interpolates the disc centres row by row.
  std::vector<double> axis_x(shape.height), axis_rx(shape.height), axis_z(shape.height),
      axis_rz(shape.height);
  for (int y = 0; y < shape.height; ++y) {
    auto hi = std::find_if(discs.begin(), discs.end(),
                           [&](const DiscGeometry& d) { return d.center_y >= y; });
    const DiscGeometry& a = hi == discs.begin() ? discs.front() : *(hi - 1);
    const DiscGeometry& b = hi == discs.end() ? discs.back() : *hi;
    const double t = (b.center_y == a.center_y) ? 0.0
                                                : std::clamp((y - a.center_y) / (b.center_y - a.center_y), 0.0, 1.0);
    axis_x[y] = a.center_x + t * (b.center_x - a.center_x);
    axis_rx[y] = 0.95 * (a.radius_x + t * (b.radius_x - a.radius_x));
    axis_z[y] = a.center_z + t * (b.center_z - a.center_z);
    axis_rz[y] = 0.95 * (a.radius_z + t * (b.radius_z - a.radius_z));
  }

  const double spine_top = discs.front().center_y - 2.5 * discs.front().radius_y;
  const double spine_bottom = discs.back().center_y + 2.5 * discs.back().radius_y;
  const double canal_rx = std::max(1.0, 0.03 * shape.width);

  for (int z = 0; z < shape.depth; ++z) {
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        const double bz = (z - (shape.depth - 1) / 2.0) / (0.75 * shape.depth);
        const double bx = (x - (shape.width - 1) / 2.0) / (0.48 * shape.width);
        auto t = Tissue::air;
        if (bz * bz + bx * bx <= 1.0) t = Tissue::soft;

        const double vz = (z - axis_z[y]) / axis_rz[y];
        const double vx = (x - axis_x[y]) / axis_rx[y];
        const bool in_column = y >= spine_top && y <= spine_bottom;
        if (in_column && vz * vz + vx * vx <= 1.0) t = Tissue::vertebra;

        const double cz = (z - axis_z[y]) / (0.45 * axis_rz[y]);
        const double cx = (x - (axis_x[y] + axis_rx[y] + 2.0 * canal_rx)) / canal_rx;
        if (cz * cz + cx * cx <= 1.0) t = Tissue::csf;

        tissue(z, y, x) = static_cast<std::uint8_t>(t);
      }
    }
  }

  for (const auto& d : discs) {
    const auto rz = occupied(d.center_z, d.radius_z);
    const auto ry = occupied(d.center_y, d.radius_y);
    const auto rx = occupied(d.center_x, d.radius_x);
    for (int z = rz.first; z <= rz.last; ++z)
      for (int y = ry.first; y <= ry.last; ++y)
        for (int x = rx.first; x <= rx.last; ++x)
          if (ellipsoid(d, z, y, x) <= 1.0) tissue(z, y, x) = static_cast<std::uint8_t>(Tissue::disc);
  }
  return tissue;
}

// Smooth 1D profile: a sum of two random low-frequency sinusoids in [-1, 1].
std::vector<double> smooth_profile(Uniform& uniform, int length) {
  const double f1 = uniform(0.3, 1.2), f2 = uniform(1.0, 2.5);
  const double p1 = uniform(0.0, 1.0), p2 = uniform(0.0, 1.0);
  std::vector<double> out(length);
  for (int i = 0; i < length; ++i) {
    const double u = static_cast<double>(i) / std::max(1, length);
    out[i] = 0.6 * std::sin(2 * std::numbers::pi * (f1 * u + p1)) +
             0.4 * std::sin(2 * std::numbers::pi * (f2 * u + p2));
  }
  return out;
}

Volume<float> render(const Volume<std::uint8_t>& tissue, const ModalityProfile& profile,
                     std::uint64_t seed, std::size_t modality_index) {
  const Shape3 shape = tissue.shape();
  if (!profile.enabled) return Volume<float>(shape, 0.0f);

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(modality_index + 1), 0x5eedu};
  std::mt19937_64 rng(seq);
  Uniform uniform(rng);

  const auto bias_y = smooth_profile(uniform, shape.height);
  const auto bias_x = smooth_profile(uniform, shape.width);
  const auto tex_z = smooth_profile(uniform, shape.depth);
  const auto tex_y = smooth_profile(uniform, shape.height);
  const auto tex_x = smooth_profile(uniform, shape.width);

  std::array<double, kTissueCount> level{};
  for (int t = 0; t < kTissueCount; ++t)
    level[t] = std::pow(std::clamp(profile.intensity[t], 0.0, 1.0), profile.gamma);

  std::normal_distribution<double> noise(0.0, profile.noise_sigma);
  Volume<float> out(shape, 0.0f, tissue.spacing());
  for (int z = 0; z < shape.depth; ++z) {
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        const double bias = 1.0 + profile.bias_amplitude * 0.5 * (bias_y[y] + bias_x[x]);
        const double texture =
            profile.texture_amplitude * (tex_z[z] * tex_y[y] + tex_x[x] * tex_y[y]) * 0.5;
        const double v = level[tissue(z, y, x)] * bias + texture + noise(rng);
        out(z, y, x) = static_cast<float>(v);
      }
    }
  }
  return normalize(out);
}

}  // namespace

Phantom generate_phantom(std::uint64_t seed, int num_discs, Shape3 shape,
                         std::span<const ModalityProfile> profiles) {
  std::mt19937_64 rng(seed);
  Phantom phantom;
  phantom.discs = place_discs(rng, num_discs, shape);

  const auto tissue = tissue_map(phantom.discs, shape);
  phantom.label = LabelVolume(shape, std::uint8_t{0});
  for (std::size_t i = 0; i < tissue.storage().size(); ++i)
    phantom.label.storage()[i] = tissue.storage()[i] == static_cast<std::uint8_t>(Tissue::disc) ? 1 : 0;

  phantom.modalities.reserve(profiles.size());
  for (std::size_t m = 0; m < profiles.size(); ++m)
    phantom.modalities.push_back({profiles[m].name, render(tissue, profiles[m], seed, m)});
  return phantom;
}

Volume<float> normalize(const Volume<float>& volume) {
  Volume<float> out = volume;
  auto values = out.data();
  if (values.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(values.begin(), values.end(), 0.0f);
    return out;
  }
  const double scale = 1.0 / (hi - lo);
  for (auto& v : values) v = static_cast<float>(std::clamp((v - lo) * scale, 0.0, 1.0));
  return out;
}

Subject to_subject(std::string id, Phantom phantom) {
  Subject subject{std::move(id), std::move(phantom.modalities), std::move(phantom.label)};
  subject.check_aligned();
  return subject;
}

}  // namespace ivdnet::data
