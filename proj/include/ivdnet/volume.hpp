#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ivdnet/error.hpp"

namespace ivdnet {

/// Volume extent as (depth, height, width); depth indexes sagittal slices.
struct Shape3 {
  int depth = 0;
  int height = 0;
  int width = 0;

  std::size_t voxels() const {
    return static_cast<std::size_t>(depth) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  std::size_t slice_voxels() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& shape);

struct Spacing {
  double depth = 1.0;
  double height = 1.0;
  double width = 1.0;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

/// Dense row-major 3D array (width varies fastest).
template <typename T>
class Volume {
public:
  Volume() = default;
  explicit Volume(Shape3 shape, T fill = T{}, Spacing spacing = {})
      : shape_(shape), spacing_(spacing), data_(shape.voxels(), fill) {
    if (shape.depth < 1 || shape.height < 1 || shape.width < 1)
      throw ValidationError("volume shape must be positive, got " + to_string(shape));
  }
  Volume(Shape3 shape, std::vector<T> data, Spacing spacing = {})
      : shape_(shape), spacing_(spacing), data_(std::move(data)) {
    if (data_.size() != shape.voxels())
      throw ValidationError("volume data size does not match shape " + to_string(shape));
  }

  const Shape3& shape() const { return shape_; }
  const Spacing& spacing() const { return spacing_; }
  void set_spacing(Spacing spacing) { spacing_ = spacing; }

  std::size_t index(int z, int y, int x) const {
    return (static_cast<std::size_t>(z) * shape_.height + y) * shape_.width + x;
  }
  T& operator()(int z, int y, int x) { return data_[index(z, y, x)]; }
  const T& operator()(int z, int y, int x) const { return data_[index(z, y, x)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::span<const T> slice(int z) const {
    return std::span<const T>(data_).subspan(static_cast<std::size_t>(z) * shape_.slice_voxels(),
                                             shape_.slice_voxels());
  }
  std::span<T> slice(int z) {
    return std::span<T>(data_).subspan(static_cast<std::size_t>(z) * shape_.slice_voxels(),
                                       shape_.slice_voxels());
  }

  bool empty() const { return data_.empty(); }

  friend bool operator==(const Volume&, const Volume&) = default;

private:
  Shape3 shape_{};
  Spacing spacing_{};
  std::vector<T> data_;
};

using LabelVolume = Volume<std::uint8_t>;

/// One 3D image of a single modality.
struct ModalityVolume {
  std::string modality;
  Volume<float> voxels;
};

/// All aligned modalities of one subject plus its reference label.
struct Subject {
  std::string id;
  std::vector<ModalityVolume> modalities;
  LabelVolume label;

  /// Throws ValidationError when modalities and label disagree on shape or
  /// spacing.
  void check_aligned() const;
};

}  // namespace ivdnet
