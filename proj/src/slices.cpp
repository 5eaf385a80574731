#include "ivdnet/slices.hpp"

#include <algorithm>

namespace ivdnet::data {

std::vector<SliceBatch> to_slices(const Subject& subject) {
  subject.check_aligned();
  const Shape3 shape = subject.label.shape();
  std::vector<SliceBatch> out;
  out.reserve(shape.depth);
  for (int z = 0; z < shape.depth; ++z) {
    SliceBatch b;
    b.height = shape.height;
    b.width = shape.width;
    for (const auto& m : subject.modalities) {
      auto plane = m.voxels.slice(z);
      b.inputs.emplace_back(plane.begin(), plane.end());
    }
    auto lab = subject.label.slice(z);
    b.labels.assign(lab.begin(), lab.end());
    b.provenance.push_back({subject.id, z});
    out.push_back(std::move(b));
  }
  return out;
}

std::vector<SliceBatch> make_batches(std::span<const SliceBatch> samples, int batch_size) {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  std::vector<SliceBatch> out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t stop = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    SliceBatch b;
    b.height = samples[start].height;
    b.width = samples[start].width;
    b.inputs.resize(samples[start].num_modalities());
    for (std::size_t i = start; i < stop; ++i) {
      const auto& s = samples[i];
      if (s.height != b.height || s.width != b.width || s.num_modalities() != b.num_modalities())
        throw ValidationError("cannot batch slices of different shape or modality count");
      for (std::size_t m = 0; m < s.num_modalities(); ++m)
        b.inputs[m].insert(b.inputs[m].end(), s.inputs[m].begin(), s.inputs[m].end());
      b.labels.insert(b.labels.end(), s.labels.begin(), s.labels.end());
      b.provenance.insert(b.provenance.end(), s.provenance.begin(), s.provenance.end());
    }
    out.push_back(std::move(b));
  }
  return out;
}

LabelVolume stack_slices(std::span<const SliceBatch> slices, const std::string& subject,
                         Shape3 shape, Spacing spacing) {
  LabelVolume volume(shape, std::uint8_t{0}, spacing);
  std::vector<bool> seen(shape.depth, false);
  for (const auto& batch : slices) {
    if (batch.labels.size() != batch.size() * batch.pixels())
      throw ValidationError("slice batch label plane size does not match its shape");
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& where = batch.provenance[i];
      if (where.subject != subject) continue;
      if (batch.height != shape.height || batch.width != shape.width)
        throw ValidationError("slice of " + subject + " does not match volume shape " +
                              to_string(shape));
      if (where.slice < 0 || where.slice >= shape.depth)
        throw ValidationError("slice index " + std::to_string(where.slice) + " of " + subject +
                              " is out of range");
      if (seen[where.slice])
        throw ValidationError("duplicate slice index " + std::to_string(where.slice) + " for " +
                              subject);
      seen[where.slice] = true;
      auto plane = batch.label(i);
      std::copy(plane.begin(), plane.end(), volume.slice(where.slice).begin());
    }
  }
  const auto missing = std::find(seen.begin(), seen.end(), false);
  if (missing != seen.end())
    throw ValidationError("missing slice index " + std::to_string(missing - seen.begin()) +
                          " for " + subject);
  return volume;
}

}  // namespace ivdnet::data
