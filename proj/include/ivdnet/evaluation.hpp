#pragma once

#include <functional>

#include "ivdnet/metrics.hpp"
#include "ivdnet/model.hpp"
#include "ivdnet/slices.hpp"

namespace ivdnet::metrics {

/// Maps a batch of input slices to the same batch with `labels` replaced by
/// the predicted mask.
using SlicePredictor = std::function<data::SliceBatch(const data::SliceBatch&)>;

/// Argmax segmentation with `net` in evaluation mode and gradients off; the
/// module's previous training flag is restored after each call.
SlicePredictor model_predictor(model::IvdNet net);

/// Predicts every sagittal slice of `subject` and stacks them back to 3D.
LabelVolume predict_volume(const SlicePredictor& predictor, const Subject& subject,
                           int batch_size = 4);

/// Slice-wise prediction, 3D stacking, then DSC and localization distance
/// against the subject's label. Throws ValidationError when the label has
/// no disc.
EvalReport evaluate_subject(const SlicePredictor& predictor, const Subject& subject,
                            int batch_size = 4);

/// Pooled 2D Dice over a set of slices (all pixels of all slices at once).
double slice_dsc(const SlicePredictor& predictor, std::span<const data::SliceBatch> slices,
                 int batch_size = 4);

}  // namespace ivdnet::metrics
