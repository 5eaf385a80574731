#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ivdnet/volume.hpp"

namespace ivdnet::data {

struct SliceProvenance {
  std::string subject;
  int slice = 0;  // sagittal index within the subject volume
  friend bool operator==(const SliceProvenance&, const SliceProvenance&) = default;
};

/// A batch of aligned 2D sagittal slices. `inputs[m]` holds modality m for
/// every sample back to back (size() * height * width values); `labels` is
/// laid out the same way. A prediction batch may carry no inputs.
struct SliceBatch {
  int height = 0;
  int width = 0;
  std::vector<std::vector<float>> inputs;
  std::vector<std::uint8_t> labels;
  std::vector<SliceProvenance> provenance;

  std::size_t size() const { return provenance.size(); }
  std::size_t num_modalities() const { return inputs.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }

  std::span<const float> input(std::size_t modality, std::size_t sample) const {
    return std::span<const float>(inputs[modality]).subspan(sample * pixels(), pixels());
  }
  std::span<const std::uint8_t> label(std::size_t sample) const {
    return std::span<const std::uint8_t>(labels).subspan(sample * pixels(), pixels());
  }
};

/// Cuts a subject into one single-sample batch per sagittal index, in order.
std::vector<SliceBatch> to_slices(const Subject& subject);

/// Groups consecutive samples into batches of `batch_size`; the last batch
/// may be smaller.
std::vector<SliceBatch> make_batches(std::span<const SliceBatch> samples, int batch_size);

/// Reassembles the label planes of `subject`'s slices into a volume of
/// `shape`, ordering by slice index. Slices of other subjects are ignored.
/// Throws ValidationError on missing, duplicate, or out-of-range indices.
LabelVolume stack_slices(std::span<const SliceBatch> slices, const std::string& subject,
                         Shape3 shape, Spacing spacing = {});

}  // namespace ivdnet::data
