#pragma once

#include <filesystem>
#include <optional>

#include <torch/torch.h>

#include "ivdnet/model.hpp"
#include "ivdnet/training.hpp"

namespace ivdnet::train {

/// Training progress stored next to the weights so a run can resume.
struct CheckpointState {
  int epoch = -1;  // last completed epoch
  TrainConfig config;
  TrainingHistory history;
};

/// Single-file checkpoint: model config (JSON), named parameters and
/// buffers, and optionally training state and Adam moments. Written to a
/// temporary file first and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const model::IvdNet& net,
                     const CheckpointState* state = nullptr,
                     const torch::optim::Optimizer* optimizer = nullptr);

struct LoadedCheckpoint {
  model::IvdNet net{nullptr};
  std::optional<CheckpointState> state;
};

/// Throws IoError (carrying the path) for missing or corrupt files.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Loads the model and, when `expected` is given, rejects a checkpoint whose
/// stored config differs with ValidationError.
model::IvdNet load_model(const std::filesystem::path& path,
                         const model::ModelConfig* expected = nullptr);

/// Restores Adam moments saved with the checkpoint. Returns false when the
/// checkpoint carries none.
bool load_optimizer_state(const std::filesystem::path& path, torch::optim::Optimizer& optimizer);

}  // namespace ivdnet::train
