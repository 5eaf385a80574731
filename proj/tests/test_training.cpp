#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ivdnet/checkpoint.hpp"
#include "ivdnet/error.hpp"
#include "ivdnet/phantom.hpp"
#include "ivdnet/training.hpp"
#include "temp_dir.hpp"

using namespace ivdnet;
using namespace ivdnet::train;
using ivdnet::oracle::TempDir;

namespace {

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.num_streams = 2;
  c.growth = {4, 8};
  c.input_size = 32;
  c.bridge_channels = 8;
  return c;
}

Subject tiny_subject(std::uint64_t seed) {
  auto profiles = data::default_profiles();
  profiles.resize(2);
  return data::to_subject("t" + std::to_string(seed), data::generate_phantom(seed, 3, {6, 32, 32}, profiles));
}

TrainingData tiny_data(bool with_validation) {
  TrainingData d;
  d.train_slices = data::to_slices(tiny_subject(1));
  if (with_validation) d.validation.push_back(tiny_subject(2));
  return d;
}

TrainConfig quick_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.initial_lr = 1e-2;
  c.lr_halve_at_epoch = epochs;
  c.batch_size = 2;
  c.seed = 3;
  return c;
}

// Per-pixel loops, written without tensor reductions.
double loop_cross_entropy(const torch::Tensor& p, const torch::Tensor& y) {
  auto pa = p.accessor<double, 4>();
  auto ya = y.accessor<std::int64_t, 3>();
  double sum = 0;
  for (int b = 0; b < p.size(0); ++b)
    for (int i = 0; i < p.size(2); ++i)
      for (int j = 0; j < p.size(3); ++j) sum -= std::log(pa[b][ya[b][i][j]][i][j]);
  return sum / static_cast<double>(p.size(0) * p.size(2) * p.size(3));
}

double loop_dice(const torch::Tensor& p, const torch::Tensor& y) {
  auto pa = p.accessor<double, 4>();
  auto ya = y.accessor<std::int64_t, 3>();
  double inter = 0, sp = 0, sy = 0;
  for (int b = 0; b < p.size(0); ++b)
    for (int i = 0; i < p.size(2); ++i)
      for (int j = 0; j < p.size(3); ++j) {
        const double fg = pa[b][1][i][j];
        const double t = ya[b][i][j] == 1 ? 1.0 : 0.0;
        inter += fg * t;
        sp += fg;
        sy += t;
      }
  return 1.0 - (2.0 * inter + 1e-6) / (sp + sy + 1e-6);
}

}  // namespace

TEST(Loss, OneHotPredictionIsNearZero) {
  auto labels = (torch::rand({2, 8, 8}) > 0.5).to(torch::kInt64);
  auto p = torch::one_hot(labels, 2).permute({0, 3, 1, 2}).to(torch::kFloat64);
  EXPECT_NEAR(compute_loss(p, labels, LossKind::cross_entropy).item<double>(), 0.0, 1e-12);
  EXPECT_NEAR(compute_loss(p, labels, LossKind::dice).item<double>(), 0.0, 1e-6);
}

TEST(Loss, UniformPredictionIsLnTwo) {
  auto labels = (torch::rand({3, 5, 7}) > 0.3).to(torch::kInt64);
  auto p = torch::full({3, 2, 5, 7}, 0.5, torch::kFloat64);
  EXPECT_NEAR(compute_loss(p, labels, LossKind::cross_entropy).item<double>(), std::log(2.0), 1e-12);
}

TEST(Loss, MatchesPixelLoops) {
  torch::manual_seed(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto logits = torch::randn({2, 2, 9, 6}, torch::kFloat64) * 3;
    auto labels = (torch::rand({2, 9, 6}) > 0.6).to(torch::kInt64);
    auto p = torch::softmax(logits, 1);
    const double ce = compute_loss(p, labels, LossKind::cross_entropy).item<double>();
    EXPECT_NEAR(ce, loop_cross_entropy(p, labels), 1e-6);
    EXPECT_NEAR(loss_from_logits(logits, labels, LossKind::cross_entropy).item<double>(), ce, 1e-6);
    const double dice = compute_loss(p, labels, LossKind::dice).item<double>();
    EXPECT_NEAR(dice, loop_dice(p, labels), 1e-6);
    EXPECT_NEAR(loss_from_logits(logits, labels, LossKind::dice).item<double>(), dice, 1e-12);
    EXPECT_GE(ce, 0.0);
  }
}

TEST(Loss, RejectsShapeMismatch) {
  auto p = torch::full({2, 2, 4, 4}, 0.5);
  EXPECT_THROW(compute_loss(p, torch::zeros({2, 4, 5}, torch::kInt64), LossKind::cross_entropy), ValidationError);
  EXPECT_THROW(compute_loss(p, torch::zeros({3, 4, 4}, torch::kInt64), LossKind::dice), ValidationError);
  EXPECT_THROW(compute_loss(torch::full({2, 1, 4, 4}, 1.0), torch::zeros({2, 4, 4}, torch::kInt64),
                            LossKind::cross_entropy),
               ValidationError);
  EXPECT_THROW(parse_loss("l2"), ValidationError);
}

TEST(Loss, LogitGradientMatchesFiniteDifferences) {
  torch::manual_seed(5);
  for (auto kind : {LossKind::cross_entropy, LossKind::dice}) {
    auto logits = torch::randn({2, 2, 4, 4}, torch::kFloat64).requires_grad_(true);
    auto labels = (torch::rand({2, 4, 4}) > 0.5).to(torch::kInt64);
    loss_from_logits(logits, labels, kind).backward();
    auto grad = logits.grad().clone();
    auto flat = logits.detach().clone().view(-1);
    const double h = 1e-6;
    for (int i = 0; i < flat.numel(); ++i) {
      auto plus = flat.clone(), minus = flat.clone();
      plus[i] += h;
      minus[i] -= h;
      const double fp = loss_from_logits(plus.view_as(logits), labels, kind).item<double>();
      const double fm = loss_from_logits(minus.view_as(logits), labels, kind).item<double>();
      const double numeric = (fp - fm) / (2 * h);
      const double analytic = grad.view(-1)[i].item<double>();
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
      EXPECT_LT(std::abs(numeric - analytic) / scale, 1e-4) << "logit " << i;
    }
  }
}

TEST(Schedule, HalvesAtTheConfiguredEpoch) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(lr_schedule(0, c), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(99, c), 1e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(100, c), 5e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(199, c), 5e-5);
  EXPECT_THROW(lr_schedule(200, c), std::out_of_range);
  EXPECT_THROW(lr_schedule(-1, c), std::out_of_range);
}

TEST(TrainConfigTest, ValidationAndJson) {
  TrainConfig c;
  c.seed = 77;
  c.loss = LossKind::dice;
  EXPECT_EQ(TrainConfig::from_json(c.to_json()), c);

  auto bad = c;
  bad.initial_lr = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.adam_beta2 = 1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.lr_halve_at_epoch = 201;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = c;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(TrainStep, ZeroLearningRateLeavesWeightsUnchanged) {
  auto net = model::build_model(tiny_config());
  std::vector<torch::Tensor> before;
  for (auto& p : net->parameters()) before.push_back(p.detach().clone());
  torch::optim::Adam adam(net->parameters(), torch::optim::AdamOptions(0.0));
  const auto slices = data::to_slices(tiny_subject(1));
  const double loss = train_step(net, adam, data::make_batches(slices, 3).front(), LossKind::cross_entropy);
  EXPECT_TRUE(std::isfinite(loss));
  auto params = net->parameters();
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_TRUE(torch::equal(params[i], before[i]));
}

TEST(TrainStep, NonFiniteLossNamesTheSlices) {
  auto net = model::build_model(tiny_config());
  auto optimizer = make_optimizer(net, TrainConfig{});
  auto batch = data::to_slices(tiny_subject(1)).front();
  batch.inputs[0][5] = std::numeric_limits<float>::quiet_NaN();
  try {
    train_step(net, optimizer, batch, LossKind::cross_entropy);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("t1#0"), std::string::npos) << e.what();
  }
}

TEST(Train, LossDecreasesAndHistoryIsComplete) {
  auto net = model::build_model(tiny_config());
  auto cfg = quick_config(10);
  int calls = 0;
  TrainOptions opts;
  opts.on_epoch = [&](const EpochRecord& r) { EXPECT_EQ(r.epoch, calls++); };
  const auto h = train::train(net, tiny_data(false), cfg, opts);
  ASSERT_EQ(h.epochs.size(), 10u);
  EXPECT_EQ(calls, 10);
  double first = 0, second = 0;
  for (int e = 0; e < 5; ++e) first += h.epochs[e].train_loss;
  for (int e = 5; e < 10; ++e) second += h.epochs[e].train_loss;
  EXPECT_LT(second, first);
  EXPECT_LT(h.epochs.back().train_loss, h.epochs.front().train_loss);
  for (const auto& e : h.epochs) EXPECT_TRUE(std::isnan(e.val_dsc));
}

TEST(Train, HalvingShowsInHistory) {
  auto net = model::build_model(tiny_config());
  auto cfg = quick_config(4);
  cfg.lr_halve_at_epoch = 2;
  TrainingData d;
  d.train_slices = data::to_slices(tiny_subject(1));
  d.train_slices.resize(2);
  const auto h = train::train(net, d, cfg);
  ASSERT_EQ(h.epochs.size(), 4u);
  EXPECT_DOUBLE_EQ(h.epochs[1].lr, 1e-2);
  EXPECT_DOUBLE_EQ(h.epochs[2].lr, 5e-3);
}

TEST(Train, EmptyTrainingSetIsRejected) {
  auto net = model::build_model(tiny_config());
  EXPECT_THROW(train::train(net, TrainingData{}, quick_config(1)), ValidationError);
}

TEST(Train, CheckpointsBestAndResume) {
  TempDir dir;
  const auto d = tiny_data(true);

  // Reference: six epochs in one go.
  auto full_cfg = quick_config(6);
  full_cfg.checkpoint_dir = (dir / "full").string();
  auto full_net = model::build_model(tiny_config());
  const auto full = train::train(full_net, d, full_cfg);

  // Same run interrupted after three epochs, then resumed.
  auto part_cfg = full_cfg;
  part_cfg.epochs = 3;
  part_cfg.lr_halve_at_epoch = 3;
  part_cfg.checkpoint_dir = (dir / "part").string();
  auto part_net = model::build_model(tiny_config());
  train::train(part_net, d, part_cfg);
  auto resume_cfg = full_cfg;
  resume_cfg.checkpoint_dir = (dir / "part").string();
  auto resumed_net = model::build_model(tiny_config());
  TrainOptions opts;
  opts.resume_from = dir / "part" / "last.pt";
  const auto resumed = train::train(resumed_net, d, resume_cfg, opts);

  ASSERT_EQ(resumed.epochs.size(), 6u);
  for (int e = 0; e < 6; ++e) {
    EXPECT_EQ(resumed.epochs[e].epoch, e);
    EXPECT_NEAR(resumed.epochs[e].train_loss, full.epochs[e].train_loss, 1e-9 * std::abs(full.epochs[e].train_loss));
  }
  auto fp = full_net->parameters(), rp = resumed_net->parameters();
  for (std::size_t i = 0; i < fp.size(); ++i) EXPECT_TRUE(torch::allclose(fp[i], rp[i], 1e-6, 1e-7));

  // best.pt holds the epoch with the highest validation DSC.
  int argmax = 0;
  for (int e = 1; e < 6; ++e)
    if (full.epochs[e].val_dsc > full.epochs[argmax].val_dsc) argmax = e;
  EXPECT_EQ(full.best_epoch, argmax);
  EXPECT_DOUBLE_EQ(full.best_val_dsc, full.epochs[argmax].val_dsc);
  const auto best = load_checkpoint(dir / "full" / "best.pt");
  ASSERT_TRUE(best.state.has_value());
  EXPECT_EQ(best.state->epoch, argmax);
  EXPECT_EQ(load_checkpoint(dir / "full" / "last.pt").state->epoch, 5);

  // history.csv mirrors the returned history.
  const auto csv = TrainingHistory::read_csv(dir / "full" / "history.csv");
  ASSERT_EQ(csv.epochs.size(), 6u);
  for (int e = 0; e < 6; ++e) {
    EXPECT_NEAR(csv.epochs[e].train_loss, full.epochs[e].train_loss, 1e-9);
    EXPECT_NEAR(csv.epochs[e].val_dsc, full.epochs[e].val_dsc, 1e-9);
  }
  EXPECT_EQ(csv.best_epoch, full.best_epoch);

  // Resuming into a differently shaped model is refused.
  auto other = tiny_config();
  other.growth = {4, 4};
  auto other_net = model::build_model(other);
  EXPECT_THROW(train::train(other_net, d, resume_cfg, opts), ValidationError);
}

TEST(History, CsvAndJsonRoundTrip) {
  TempDir dir;
  TrainingHistory h;
  h.epochs = {{0, 1e-4, 0.7, std::nan("")}, {1, 1e-4, 0.5, 0.25}, {2, 5e-5, 0.4, 0.75}};
  h.write_csv(dir / "h.csv");
  const auto back = TrainingHistory::read_csv(dir / "h.csv");
  ASSERT_EQ(back.epochs.size(), 3u);
  EXPECT_TRUE(std::isnan(back.epochs[0].val_dsc));
  EXPECT_DOUBLE_EQ(back.epochs[2].lr, 5e-5);
  EXPECT_EQ(back.best_epoch, 2);

  h.best_epoch = 2;
  h.best_val_dsc = 0.75;
  const auto j = TrainingHistory::from_json(h.to_json());
  EXPECT_TRUE(std::isnan(j.epochs[0].val_dsc));
  EXPECT_DOUBLE_EQ(j.epochs[1].train_loss, 0.5);
  EXPECT_EQ(j.best_epoch, 2);

  EXPECT_THROW(TrainingHistory::read_csv(dir / "none.csv"), IoError);
}
