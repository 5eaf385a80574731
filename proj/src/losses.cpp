#include "ivdnet/error.hpp"
#include "ivdnet/training.hpp"

namespace ivdnet::train {

std::string_view to_string(LossKind kind) {
  return kind == LossKind::cross_entropy ? "cross_entropy" : "dice";
}

LossKind parse_loss(std::string_view name) {
  if (name == "cross_entropy" || name == "ce") return LossKind::cross_entropy;
  if (name == "dice" || name == "dice_loss") return LossKind::dice;
  throw ValidationError("unknown loss '" + std::string(name) + "' (cross_entropy, dice)");
}

namespace {

constexpr double kDiceSmooth = 1e-6;

void check_shapes(const torch::Tensor& scores, const torch::Tensor& labels) {
  if (scores.dim() != 4 || labels.dim() != 3 || scores.size(0) != labels.size(0) ||
      scores.size(2) != labels.size(1) || scores.size(3) != labels.size(2))
    throw ValidationError("predictions must be (batch, C, H, W) and labels (batch, H, W)");
  if (scores.size(1) < 2) throw ValidationError("predictions need at least two classes");
}

torch::Tensor soft_dice_loss(const torch::Tensor& probabilities, const torch::Tensor& labels) {
  auto fg = probabilities.select(1, 1);
  auto target = labels.eq(1).to(probabilities.dtype());
  auto inter = (fg * target).sum();
  auto denom = fg.sum() + target.sum();
  return 1.0 - (2.0 * inter + kDiceSmooth) / (denom + kDiceSmooth);
}

}  // namespace

torch::Tensor compute_loss(const torch::Tensor& probabilities, const torch::Tensor& labels,
                           LossKind kind) {
  check_shapes(probabilities, labels);
  if (kind == LossKind::dice) return soft_dice_loss(probabilities, labels);
  const double tiny = probabilities.scalar_type() == torch::kFloat64 ? 1e-300 : 1e-30;
  auto picked = probabilities.gather(1, labels.unsqueeze(1)).squeeze(1);
  return -torch::log(torch::clamp_min(picked, tiny)).mean();
}

torch::Tensor loss_from_logits(const torch::Tensor& logits, const torch::Tensor& labels, LossKind kind) {
  check_shapes(logits, labels);
  if (kind == LossKind::dice) return soft_dice_loss(torch::softmax(logits, 1), labels);
  return torch::nll_loss2d(torch::log_softmax(logits, 1), labels);
}

}  // namespace ivdnet::train
