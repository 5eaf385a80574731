#include "ivdnet/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "ivdnet/checkpoint.hpp"
#include "ivdnet/error.hpp"
#include "ivdnet/evaluation.hpp"
#include "ivdnet/metrics.hpp"

namespace ivdnet::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) throw ValidationError("initial_lr must be > 0");
  if (lr_halve_at_epoch < 0 || lr_halve_at_epoch > epochs)
    throw ValidationError("lr_halve_at_epoch must lie in [0, epochs]");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
    throw ValidationError("Adam betas must lie in (0, 1)");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"initial_lr", initial_lr},
          {"lr_halve_at_epoch", lr_halve_at_epoch},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"batch_size", batch_size},
          {"seed", seed},
          {"checkpoint_dir", checkpoint_dir},
          {"loss", std::string(train::to_string(loss))}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  TrainConfig c;
  try {
    c.epochs = doc.at("epochs").get<int>();
    c.initial_lr = doc.at("initial_lr").get<double>();
    c.lr_halve_at_epoch = doc.at("lr_halve_at_epoch").get<int>();
    c.adam_beta1 = doc.at("adam_beta1").get<double>();
    c.adam_beta2 = doc.at("adam_beta2").get<double>();
    c.batch_size = doc.at("batch_size").get<int>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.checkpoint_dir = doc.at("checkpoint_dir").get<std::string>();
    c.loss = parse_loss(doc.at("loss").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_schedule(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch >= config.epochs)
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(config.epochs) + ")");
  return epoch < config.lr_halve_at_epoch ? config.initial_lr : config.initial_lr / 2.0;
}

void TrainingHistory::write_csv(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << "epoch,lr,train_loss,val_dsc\n";
  char line[160];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.10g\n", e.epoch, e.lr, e.train_loss, e.val_dsc);
    out << line;
  }
}

TrainingHistory TrainingHistory::read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open history");
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,lr,train_loss,val_dsc", 0) != 0)
    throw IoError(path.string(), "missing history header");
  TrainingHistory h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochRecord r;
    std::istringstream fields(line);
    std::string cell[4];
    for (auto& c : cell)
      if (!std::getline(fields, c, ',')) throw IoError(path.string(), "short history row: " + line);
    try {
      r.epoch = std::stoi(cell[0]);
      r.lr = std::stod(cell[1]);
      r.train_loss = std::stod(cell[2]);
      r.val_dsc = cell[3] == "nan" || cell[3] == "-nan" ? std::numeric_limits<double>::quiet_NaN()
                                                        : std::stod(cell[3]);
    } catch (const std::exception&) {
      throw IoError(path.string(), "malformed history row: " + line);
    }
    if (!std::isnan(r.val_dsc) && r.val_dsc > h.best_val_dsc) {
      h.best_val_dsc = r.val_dsc;
      h.best_epoch = r.epoch;
    }
    h.epochs.push_back(r);
  }
  return h;
}

nlohmann::json TrainingHistory::to_json() const {
  // NaN is not representable in JSON; it round-trips as null.
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : epochs)
    rows.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"train_loss", num(e.train_loss)}, {"val_dsc", num(e.val_dsc)}});
  return {{"epochs", rows}, {"best_epoch", best_epoch}, {"best_val_dsc", best_val_dsc}};
}

TrainingHistory TrainingHistory::from_json(const nlohmann::json& doc) {
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  TrainingHistory h;
  for (const auto& row : doc.at("epochs"))
    h.epochs.push_back({row.at("epoch").get<int>(), row.at("lr").get<double>(), num(row.at("train_loss")),
                        num(row.at("val_dsc"))});
  h.best_epoch = doc.at("best_epoch").get<int>();
  h.best_val_dsc = doc.at("best_val_dsc").get<double>();
  return h;
}

torch::optim::Adam make_optimizer(model::IvdNet& net, const TrainConfig& config) {
  return torch::optim::Adam(net->parameters(), torch::optim::AdamOptions(config.initial_lr)
                                                   .betas({config.adam_beta1, config.adam_beta2}));
}

namespace {

void set_learning_rate(torch::optim::Optimizer& optimizer, double lr) {
  for (auto& group : optimizer.param_groups())
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

std::string describe(const data::SliceBatch& batch) {
  std::string out;
  for (const auto& p : batch.provenance) out += (out.empty() ? "" : ", ") + p.subject + "#" + std::to_string(p.slice);
  return out;
}

void copy_state(const model::IvdNet& from, model::IvdNet& to) {
  torch::NoGradGuard no_grad;
  auto src_params = from->named_parameters();
  for (auto& p : to->named_parameters()) p.value().copy_(src_params[p.key()]);
  auto src_buffers = from->named_buffers();
  for (auto& b : to->named_buffers()) b.value().copy_(src_buffers[b.key()]);
}

}  // namespace

double train_step(model::IvdNet& net, torch::optim::Optimizer& optimizer, const data::SliceBatch& batch,
                  LossKind loss_kind) {
  net->train();
  optimizer.zero_grad();
  const auto dtype = net->parameters().front().scalar_type();
  auto loss = loss_from_logits(net->logits(model::input_tensors(batch, dtype)), model::label_tensor(batch),
                               loss_kind);
  const double value = loss.item<double>();
  if (!std::isfinite(value))
    throw TrainingError("non-finite loss " + std::to_string(value) + " on slices [" + describe(batch) + "]");
  loss.backward();
  optimizer.step();
  return value;
}

TrainingHistory train(model::IvdNet& net, const TrainingData& data, const TrainConfig& config,
                      const TrainOptions& options) {
  config.validate();
  if (data.train_slices.empty()) throw ValidationError("training set is empty");

  auto optimizer = make_optimizer(net, config);
  TrainingHistory history;
  int start_epoch = 0;

  if (options.resume_from) {
    auto loaded = load_checkpoint(*options.resume_from);
    if (!(loaded.net->config() == net->config()))
      throw ValidationError(options.resume_from->string() + ": checkpoint model config differs from the model");
    if (!loaded.state) throw ValidationError(options.resume_from->string() + ": checkpoint has no training state");
    copy_state(loaded.net, net);
    load_optimizer_state(*options.resume_from, optimizer);
    history = loaded.state->history;
    start_epoch = loaded.state->epoch + 1;
  }

  const fs::path dir = config.checkpoint_dir;
  if (!dir.empty()) fs::create_directories(dir);

  std::vector<std::size_t> order(data.train_slices.size());
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config);
    set_learning_rate(optimizer, lr);

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<data::SliceBatch> shuffled;
    shuffled.reserve(order.size());
    for (auto i : order) shuffled.push_back(data.train_slices[i]);

    double loss_sum = 0.0;
    std::size_t samples = 0;
    for (const auto& batch : data::make_batches(shuffled, config.batch_size)) {
      double loss = 0.0;
      try {
        loss = train_step(net, optimizer, batch, config.loss);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += loss * static_cast<double>(batch.size());
      samples += batch.size();
    }

    EpochRecord record{epoch, lr, loss_sum / static_cast<double>(samples),
                       std::numeric_limits<double>::quiet_NaN()};
    if (!data.validation.empty()) {
      auto predictor = metrics::model_predictor(net);
      double total = 0.0;
      for (const auto& subject : data.validation)
        total += metrics::dsc(subject.label, metrics::predict_volume(predictor, subject, config.batch_size));
      record.val_dsc = total / static_cast<double>(data.validation.size());
    }
    history.epochs.push_back(record);

    const bool improved = data.validation.empty() || record.val_dsc > history.best_val_dsc;
    if (improved) {
      history.best_epoch = epoch;
      history.best_val_dsc = data.validation.empty() ? history.best_val_dsc : record.val_dsc;
    }

    if (!dir.empty()) {
      CheckpointState state{epoch, config, history};
      save_checkpoint(dir / "last.pt", net, &state, &optimizer);
      if (improved) save_checkpoint(dir / "best.pt", net, &state, &optimizer);
      history.write_csv(dir / "history.csv");
    }
    if (options.on_epoch) options.on_epoch(record);
  }
  return history;
}

}  // namespace ivdnet::train
