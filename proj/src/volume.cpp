#include "ivdnet/volume.hpp"

namespace ivdnet {

std::string to_string(const Shape3& shape) {
  return std::to_string(shape.depth) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

void Subject::check_aligned() const {
  for (const auto& m : modalities) {
    if (m.voxels.shape() != label.shape())
      throw ValidationError("subject " + id + ": modality '" + m.modality + "' has shape " +
                            to_string(m.voxels.shape()) + " but label has " +
                            to_string(label.shape()));
    if (m.voxels.spacing() != label.spacing())
      throw ValidationError("subject " + id + ": modality '" + m.modality +
                            "' spacing differs from label spacing");
  }
}

}  // namespace ivdnet
