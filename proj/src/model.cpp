#include "ivdnet/model.hpp"

#include <cmath>

#include <ATen/CPUGeneratorImpl.h>

#include "ivdnet/error.hpp"

namespace ivdnet::model {

std::string_view to_string(Fusion fusion) {
  switch (fusion) {
    case Fusion::early: return "early";
    case Fusion::late: return "late";
    case Fusion::hyper_dense: return "hyper_dense";
  }
  return "unknown";
}

Fusion parse_fusion(std::string_view name) {
  if (name == "early") return Fusion::early;
  if (name == "late") return Fusion::late;
  if (name == "hyper_dense" || name == "hyper-dense") return Fusion::hyper_dense;
  throw ValidationError("unknown fusion '" + std::string(name) + "' (early, late, hyper_dense)");
}

std::string_view to_string(BlockVariant variant) {
  return variant == BlockVariant::standard ? "standard" : "asymmetric";
}

BlockVariant parse_block_variant(std::string_view name) {
  if (name == "standard") return BlockVariant::standard;
  if (name == "asymmetric" || name == "asym") return BlockVariant::asymmetric;
  throw ValidationError("unknown block variant '" + std::string(name) + "' (standard, asymmetric)");
}

void ModelConfig::validate() const {
  if (num_streams < 1) throw ValidationError("num_streams must be >= 1");
  if (growth.empty()) throw ValidationError("growth must not be empty");
  for (int c : growth)
    if (c < 1) throw ValidationError("growth entries must be >= 1");
  if (bridge_channels < 1) throw ValidationError("bridge_channels must be >= 1");
  if (growth.size() > 16) throw ValidationError("at most 16 encoder levels are supported");
  const int factor = 1 << growth.size();
  if (input_size < factor || input_size % factor != 0)
    throw ValidationError("input_size " + std::to_string(input_size) + " is not divisible by " +
                          std::to_string(factor));
  if (dilation_rates[0] < 2 || dilation_rates[1] < 2 || dilation_rates[0] == dilation_rates[1])
    throw ValidationError("dilation rates must be distinct and >= 2");
  if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
}

plan::ConnectivityPlan ModelConfig::connectivity() const {
  switch (fusion) {
    case Fusion::early:
      return plan::build_plan(1, growth, plan::ConnectivityMode::plain, num_streams, false);
    case Fusion::late:
      return plan::build_plan(num_streams, growth, plan::ConnectivityMode::plain, 1, false);
    case Fusion::hyper_dense:
      return plan::build_plan(num_streams, growth, plan::ConnectivityMode::hyper_dense, 1,
                              permute_streams);
  }
  throw ValidationError("unknown fusion mode");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"num_streams", num_streams},
          {"input_size", input_size},
          {"growth", growth},
          {"bridge_channels", bridge_channels},
          {"fusion", std::string(model::to_string(fusion))},
          {"block_variant", std::string(model::to_string(block_variant))},
          {"dilation_rates", {dilation_rates[0], dilation_rates[1]}},
          {"num_classes", num_classes},
          {"permute_streams", permute_streams},
          {"init_seed", init_seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
  ModelConfig c;
  try {
    c.num_streams = doc.at("num_streams").get<int>();
    c.input_size = doc.at("input_size").get<int>();
    c.growth = doc.at("growth").get<std::vector<int>>();
    c.bridge_channels = doc.at("bridge_channels").get<int>();
    c.fusion = parse_fusion(doc.at("fusion").get<std::string>());
    c.block_variant = parse_block_variant(doc.at("block_variant").get<std::string>());
    const auto rates = doc.at("dilation_rates").get<std::vector<int>>();
    if (rates.size() != 2) throw ValidationError("dilation_rates needs two entries");
    c.dilation_rates = {rates[0], rates[1]};
    c.num_classes = doc.at("num_classes").get<int>();
    c.permute_streams = doc.at("permute_streams").get<bool>();
    c.init_seed = doc.at("init_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

IvdNetImpl::IvdNetImpl(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  plan_ = config_.connectivity();
  const int levels = config_.num_levels();
  const int streams = plan_.num_streams;

  for (int s = 1; s <= streams; ++s) {
    const std::string prefix = "stream" + std::to_string(s) + "_";
    first_layers_.push_back(register_module(
        prefix + "layer1",
        ConvBnRelu(ConvBnReluOptions{plan::input_channels(plan_, 1, s), config_.growth[0]})));
    std::vector<ExtendedInceptionBlock> blocks;
    for (int l = 2; l <= levels; ++l)
      blocks.push_back(register_module(
          prefix + "layer" + std::to_string(l),
          extended_inception_block(plan::input_channels(plan_, l, s), config_.growth[l - 1],
                                   config_.block_variant, config_.dilation_rates)));
    encoders_.push_back(std::move(blocks));
  }

  bridge_ = register_module("bridge",
                            extended_inception_block(plan_.bridge_input_channels(), config_.bridge_channels,
                                                     config_.block_variant, config_.dilation_rates));

  int channels = config_.bridge_channels;
  for (int i = 1; i <= levels; ++i) {
    const int out = config_.growth[levels - i];
    upsamplers_.push_back(register_module(
        "upsample" + std::to_string(i),
        torch::nn::ConvTranspose2d(torch::nn::ConvTranspose2dOptions(channels, out, 2).stride(2).bias(false))));
    decoders_.push_back(register_module(
        "decoder" + std::to_string(i),
        extended_inception_block(out, out, config_.block_variant, config_.dilation_rates)));
    channels = out;
  }
  head_ = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, config_.num_classes, 1)));

  needed_.assign(levels, std::vector<bool>(streams, false));
  auto mark = [&](const std::vector<plan::SourceRef>& refs) {
    for (const auto& r : refs)
      if (r.layer >= 1) needed_[r.layer - 1][r.stream - 1] = true;
  };
  for (int l = 2; l <= levels; ++l)
    for (int s = 1; s <= streams; ++s) mark(plan_.inputs(l, s));
  mark(plan_.bridge_inputs);

  initialize();
}

void IvdNetImpl::initialize() {
  auto gen = at::detail::createCPUGenerator(config_.init_seed);
  torch::NoGradGuard no_grad;
  for (auto& module : modules(/*include_self=*/false)) {
    if (auto* conv = module->as<torch::nn::Conv2d>()) {
      const auto& w = conv->weight;
      const double fan_in = static_cast<double>(w.size(1) * w.size(2) * w.size(3));
      w.normal_(0.0, std::sqrt(2.0 / fan_in), gen);
      if (conv->bias.defined()) conv->bias.zero_();
    } else if (auto* up = module->as<torch::nn::ConvTranspose2d>()) {
      // Stride equals kernel size, so each output pixel sees one tap per
      // input channel.
      const auto& w = up->weight;
      w.normal_(0.0, std::sqrt(2.0 / static_cast<double>(w.size(0))), gen);
      if (up->bias.defined()) up->bias.zero_();
    }
  }
}

ConvBnRelu IvdNetImpl::first_layer(int stream) const {
  return first_layers_.at(stream - 1);
}

ExtendedInceptionBlock IvdNetImpl::encoder_block(int layer, int stream) const {
  return encoders_.at(stream - 1).at(layer - 2);
}

void IvdNetImpl::check_inputs(const std::vector<torch::Tensor>& modalities) const {
  if (static_cast<int>(modalities.size()) != config_.num_streams)
    throw ValidationError("expected " + std::to_string(config_.num_streams) + " modality tensors, got " +
                          std::to_string(modalities.size()));
  const auto& ref = modalities.front();
  if (ref.dim() != 4 || ref.size(1) != 1)
    throw ValidationError("modality tensors must have shape (batch, 1, H, W)");
  for (const auto& m : modalities)
    if (m.sizes() != ref.sizes())
      throw ValidationError("modality tensors disagree on shape");
  const int64_t factor = int64_t{1} << config_.num_levels();
  if (ref.size(2) % factor != 0 || ref.size(3) % factor != 0)
    throw ValidationError("spatial size must be divisible by " + std::to_string(factor));
}

namespace {

std::vector<std::int64_t> feature_shape(const torch::Tensor& t) {
  return {t.sizes().begin() + 1, t.sizes().end()};
}

void record(std::vector<LayerTrace>* trace, std::string name, int stream, const torch::Tensor& in,
            const torch::Tensor& out) {
  if (trace) trace->push_back({std::move(name), stream, feature_shape(in), feature_shape(out)});
}

torch::Tensor pool(const torch::Tensor& x) { return probed_max_pool(x); }

}  // namespace

torch::Tensor IvdNetImpl::forward(const std::vector<torch::Tensor>& modalities) {
  return torch::softmax(logits(modalities), 1);
}

torch::Tensor IvdNetImpl::logits(const std::vector<torch::Tensor>& modalities,
                                 std::vector<LayerTrace>* trace) {
  check_inputs(modalities);
  const int levels = config_.num_levels();
  const int streams = num_encoder_streams();

  std::vector<torch::Tensor> raw =
      config_.fusion == Fusion::early ? std::vector<torch::Tensor>{torch::cat(modalities, 1)} : modalities;

  // skips[k][s]: output of layer k+1 at its own resolution.
  // pooled[k][s]: the same map pooled down to the current level.
  std::vector<std::vector<torch::Tensor>> skips(levels, std::vector<torch::Tensor>(streams));
  std::vector<std::vector<torch::Tensor>> pooled(levels, std::vector<torch::Tensor>(streams));

  auto gather = [&](const std::vector<plan::SourceRef>& refs) {
    std::vector<torch::Tensor> parts;
    parts.reserve(refs.size());
    for (const auto& r : refs) parts.push_back(pooled[r.layer - 1][r.stream - 1]);
    return parts.size() == 1 ? parts.front() : torch::cat(parts, 1);
  };

  for (int l = 1; l <= levels; ++l) {
    for (int s = 1; s <= streams; ++s) {
      torch::Tensor in, out;
      if (l == 1) {
        in = raw[s - 1];
        out = first_layers_[s - 1]->forward(in);
        record(trace, "Conv Layer 1", s, in, out);
      } else {
        in = gather(plan_.inputs(l, s));
        out = encoders_[s - 1][l - 2]->forward(in);
        record(trace, "Layer " + std::to_string(l), s, in, out);
      }
      skips[l - 1][s - 1] = out;
    }
    // Move every live map down one level.
    for (int s = 1; s <= streams; ++s) {
      for (int k = 1; k < l; ++k)
        if (pooled[k - 1][s - 1].defined()) pooled[k - 1][s - 1] = pool(pooled[k - 1][s - 1]);
      const auto& out = skips[l - 1][s - 1];
      auto down = pool(out);
      record(trace, "Max-pooling " + std::to_string(l), s, out, down);
      if (needed_[l - 1][s - 1]) pooled[l - 1][s - 1] = down;
    }
  }

  auto bridge_in = gather(plan_.bridge_inputs);
  auto x = bridge_->forward(bridge_in);
  record(trace, "Bridge", 0, bridge_in, x);
  pooled.clear();

  for (int i = 1; i <= levels; ++i) {
    const int level = levels - i;  // 0-based encoder level of the skip
    auto up = upsamplers_[i - 1]->forward(x);
    record(trace, "Up-sample " + std::to_string(i), 0, x, up);
    auto merged = up;
    for (const auto& skip : skips[level]) merged = merged + skip;
    x = decoders_[i - 1]->forward(merged);
    record(trace, "Layer " + std::to_string(levels + i), 0, merged, x);
  }

  auto scores = head_->forward(x);
  record(trace, "Softmax layer", 0, x, scores);
  return scores;
}

IvdNet build_model(const ModelConfig& config) { return IvdNet(config); }

std::int64_t parameter_count(const IvdNet& model) { return parameter_count(*model); }

std::vector<torch::Tensor> input_tensors(const data::SliceBatch& batch, torch::Dtype dtype) {
  std::vector<torch::Tensor> out;
  const auto n = static_cast<int64_t>(batch.size());
  for (const auto& plane : batch.inputs) {
    if (plane.size() != batch.size() * batch.pixels())
      throw ValidationError("slice batch input plane size does not match its shape");
    auto t = torch::from_blob(const_cast<float*>(plane.data()), {n, 1, batch.height, batch.width},
                              torch::kFloat32)
                 .clone();
    out.push_back(dtype == torch::kFloat32 ? t : t.to(dtype));
  }
  return out;
}

torch::Tensor label_tensor(const data::SliceBatch& batch) {
  const auto n = static_cast<int64_t>(batch.size());
  if (batch.labels.size() != batch.size() * batch.pixels())
    throw ValidationError("slice batch label plane size does not match its shape");
  auto t = torch::from_blob(const_cast<std::uint8_t*>(batch.labels.data()), {n, batch.height, batch.width},
                            torch::kUInt8);
  return t.to(torch::kInt64);
}

}  // namespace ivdnet::model
