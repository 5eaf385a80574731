#include "ivdnet/checkpoint.hpp"

#include "ivdnet/error.hpp"

namespace ivdnet::train {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "ivdnet-checkpoint-v1";

torch::serialize::InputArchive open_archive(const fs::path& path) {
  if (!fs::exists(path)) throw IoError(path.string(), "checkpoint does not exist");
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IoError(path.string(), "corrupt checkpoint: " + std::string(e.what_without_backtrace()));
  }
  c10::IValue format;
  if (!archive.try_read("format", format) || !format.isString() || format.toStringRef() != kFormat)
    throw IoError(path.string(), "not an ivdnet checkpoint");
  return archive;
}

std::string read_string(torch::serialize::InputArchive& archive, const std::string& key,
                        const fs::path& path) {
  c10::IValue value;
  if (!archive.try_read(key, value) || !value.isString())
    throw IoError(path.string(), "checkpoint lacks '" + key + "'");
  return value.toStringRef();
}

}  // namespace

void save_checkpoint(const fs::path& path, const model::IvdNet& net, const CheckpointState* state,
                     const torch::optim::Optimizer* optimizer) {
  torch::serialize::OutputArchive archive;
  archive.write("format", c10::IValue(std::string(kFormat)));
  archive.write("config", c10::IValue(net->config().to_json().dump()));

  torch::serialize::OutputArchive weights;
  net->save(weights);
  archive.write("model", weights);

  if (state) {
    nlohmann::json doc{{"epoch", state->epoch},
                       {"train_config", state->config.to_json()},
                       {"history", state->history.to_json()}};
    archive.write("state", c10::IValue(doc.dump()));
  }
  if (optimizer) {
    torch::serialize::OutputArchive moments;
    optimizer->save(moments);
    archive.write("optimizer", moments);
  }

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw IoError(path.string(), "cannot write checkpoint: " + std::string(e.what_without_backtrace()));
  }
  fs::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  auto archive = open_archive(path);
  model::ModelConfig config;
  try {
    config = model::ModelConfig::from_json(nlohmann::json::parse(read_string(archive, "config", path)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), std::string("corrupt config: ") + e.what());
  } catch (const ValidationError& e) {
    throw IoError(path.string(), std::string("invalid config: ") + e.what());
  }

  LoadedCheckpoint out;
  out.net = model::build_model(config);
  try {
    torch::serialize::InputArchive weights;
    archive.read("model", weights);
    out.net->load(weights);
  } catch (const c10::Error& e) {
    throw IoError(path.string(), "weights do not match the stored config: " +
                                     std::string(e.what_without_backtrace()));
  }

  c10::IValue state;
  if (archive.try_read("state", state) && state.isString()) {
    try {
      const auto doc = nlohmann::json::parse(state.toStringRef());
      CheckpointState s;
      s.epoch = doc.at("epoch").get<int>();
      s.config = TrainConfig::from_json(doc.at("train_config"));
      s.history = TrainingHistory::from_json(doc.at("history"));
      out.state = std::move(s);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string(), std::string("corrupt training state: ") + e.what());
    }
  }
  return out;
}

model::IvdNet load_model(const fs::path& path, const model::ModelConfig* expected) {
  auto loaded = load_checkpoint(path);
  if (expected && !(loaded.net->config() == *expected))
    throw ValidationError(path.string() + ": checkpoint config " + loaded.net->config().to_json().dump() +
                          " does not match expected " + expected->to_json().dump());
  return loaded.net;
}

bool load_optimizer_state(const fs::path& path, torch::optim::Optimizer& optimizer) {
  auto archive = open_archive(path);
  torch::serialize::InputArchive moments;
  if (!archive.try_read("optimizer", moments)) return false;
  try {
    optimizer.load(moments);
  } catch (const c10::Error& e) {
    throw IoError(path.string(), "optimizer state does not match: " + std::string(e.what_without_backtrace()));
  }
  return true;
}

}  // namespace ivdnet::train
