#include "ivdnet/evaluation.hpp"

namespace ivdnet::metrics {

SlicePredictor model_predictor(model::IvdNet net) {
  return [net](const data::SliceBatch& batch) mutable {
    const bool was_training = net->is_training();
    net->eval();
    torch::NoGradGuard no_grad;
    const auto dtype = net->parameters().front().scalar_type();
    auto scores = net->logits(model::input_tensors(batch, dtype));
    auto mask = scores.argmax(1).to(torch::kUInt8).contiguous();
    if (was_training) net->train();

    data::SliceBatch out;
    out.height = batch.height;
    out.width = batch.width;
    out.provenance = batch.provenance;
    out.labels.assign(mask.data_ptr<std::uint8_t>(), mask.data_ptr<std::uint8_t>() + mask.numel());
    return out;
  };
}

LabelVolume predict_volume(const SlicePredictor& predictor, const Subject& subject, int batch_size) {
  const auto slices = data::to_slices(subject);
  std::vector<data::SliceBatch> predicted;
  for (const auto& batch : data::make_batches(slices, batch_size)) predicted.push_back(predictor(batch));
  return data::stack_slices(predicted, subject.id, subject.label.shape(), subject.label.spacing());
}

EvalReport evaluate_subject(const SlicePredictor& predictor, const Subject& subject, int batch_size) {
  const auto predicted = predict_volume(predictor, subject, batch_size);
  return evaluate_masks(subject.id, subject.label, predicted);
}

double slice_dsc(const SlicePredictor& predictor, std::span<const data::SliceBatch> slices, int batch_size) {
  std::size_t inter = 0, total = 0;
  for (const auto& batch : data::make_batches(slices, batch_size)) {
    const auto predicted = predictor(batch);
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
      const bool r = batch.labels[i] != 0, a = predicted.labels[i] != 0;
      inter += r && a;
      total += static_cast<std::size_t>(r) + static_cast<std::size_t>(a);
    }
  }
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

}  // namespace ivdnet::metrics
