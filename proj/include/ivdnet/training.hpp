#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "ivdnet/model.hpp"
#include "ivdnet/slices.hpp"
#include "ivdnet/volume.hpp"

namespace ivdnet::train {

enum class LossKind { cross_entropy, dice };

std::string_view to_string(LossKind kind);
LossKind parse_loss(std::string_view name);

struct TrainConfig {
  int epochs = 200;
  double initial_lr = 1e-4;
  int lr_halve_at_epoch = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  int batch_size = 4;
  std::uint64_t seed = 0;
  std::string checkpoint_dir;  // empty: keep nothing on disk
  LossKind loss = LossKind::cross_entropy;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Loss of per-pixel class probabilities (batch, C, H, W) against int64
/// labels (batch, H, W). Cross-entropy is the mean over pixels of
/// -log p[label]; dice is 1 - soft Dice of the foreground (class 1)
/// probabilities. Throws ValidationError on shape mismatch.
torch::Tensor compute_loss(const torch::Tensor& probabilities, const torch::Tensor& labels,
                           LossKind kind);

/// Same losses evaluated from pre-softmax scores; cross-entropy goes through
/// log-softmax and is the form used for optimization.
torch::Tensor loss_from_logits(const torch::Tensor& logits, const torch::Tensor& labels, LossKind kind);

/// initial_lr before lr_halve_at_epoch, half of it from then on. Epochs are
/// 0-based; throws std::out_of_range outside [0, epochs).
double lr_schedule(int epoch, const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_dsc = 0.0;  // NaN without validation subjects
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_dsc = -1.0;

  void write_csv(const std::filesystem::path& path) const;
  static TrainingHistory read_csv(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static TrainingHistory from_json(const nlohmann::json& doc);
};

struct TrainingData {
  std::vector<data::SliceBatch> train_slices;  // single-sample batches
  std::vector<Subject> validation;
};

/// Thrown when the loss turns non-finite.
class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  std::optional<std::filesystem::path> resume_from;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Adam training with the step schedule above. Each epoch shuffles the
/// training slices with a generator seeded by (seed, epoch), runs one step
/// per batch, then scores validation subjects by 3D DSC. When
/// checkpoint_dir is set, writes last.pt every epoch, best.pt on every
/// validation improvement, and history.csv. Resuming restores weights,
/// optimizer moments and history and continues at the next epoch.
TrainingHistory train(model::IvdNet& net, const TrainingData& data, const TrainConfig& config,
                      const TrainOptions& options = {});

/// One optimizer step on one batch; returns the batch loss.
double train_step(model::IvdNet& net, torch::optim::Optimizer& optimizer,
                  const data::SliceBatch& batch, LossKind loss);

torch::optim::Adam make_optimizer(model::IvdNet& net, const TrainConfig& config);

}  // namespace ivdnet::train
