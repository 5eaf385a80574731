#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <torch/torch.h>

#include "ivdnet/blocks.hpp"
#include "ivdnet/connectivity.hpp"
#include "ivdnet/slices.hpp"

namespace ivdnet::model {

enum class Fusion { early, late, hyper_dense };

std::string_view to_string(Fusion fusion);
Fusion parse_fusion(std::string_view name);
std::string_view to_string(BlockVariant variant);
BlockVariant parse_block_variant(std::string_view name);

struct ModelConfig {
  int num_streams = 4;
  int input_size = 256;
  std::vector<int> growth{32, 64, 128, 256};
  int bridge_channels = 512;
  Fusion fusion = Fusion::hyper_dense;
  BlockVariant block_variant = BlockVariant::standard;
  std::array<int, 2> dilation_rates{2, 4};
  int num_classes = 2;
  bool permute_streams = true;
  std::uint64_t init_seed = 0;

  /// Throws ValidationError when any documented constraint fails.
  void validate() const;
  int num_levels() const { return static_cast<int>(growth.size()); }
  /// Encoder wiring implied by the fusion mode.
  plan::ConnectivityPlan connectivity() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Input/output shape of one named stage, batch dimension dropped.
struct LayerTrace {
  std::string name;
  int stream = 0;  // 1-based encoder stream, 0 for shared stages
  std::vector<std::int64_t> input_shape;
  std::vector<std::int64_t> output_shape;
};

/// Multi-stream UNet. Layer 1 of every stream is a plain 3x3 convolution,
/// layers 2..L and the bridge are extended inception blocks, each encoder
/// layer is followed by 2x2 max-pooling, and the decoder up-samples with
/// stride-2 transposed convolutions and adds the stream-summed encoder
/// outputs of the matching level before each inception block.
///
/// Dense sources produced at a finer level are max-pooled alongside the
/// stream so that every concatenated map has the consuming layer's
/// resolution.
class IvdNetImpl : public torch::nn::Module {
public:
  explicit IvdNetImpl(ModelConfig config);

  /// Per-pixel class probabilities, shape (batch, num_classes, H, W).
  torch::Tensor forward(const std::vector<torch::Tensor>& modalities);
  /// Pre-softmax scores; when `trace` is set, appends one entry per stage.
  torch::Tensor logits(const std::vector<torch::Tensor>& modalities,
                       std::vector<LayerTrace>* trace = nullptr);

  const ModelConfig& config() const { return config_; }
  const plan::ConnectivityPlan& connectivity() const { return plan_; }
  int num_encoder_streams() const { return static_cast<int>(first_layers_.size()); }
  /// Layer-1 convolution of a 1-based encoder stream.
  ConvBnRelu first_layer(int stream) const;
  /// Encoder block for layer >= 2 of a 1-based stream.
  ExtendedInceptionBlock encoder_block(int layer, int stream) const;

private:
  void check_inputs(const std::vector<torch::Tensor>& modalities) const;
  void initialize();

  ModelConfig config_;
  plan::ConnectivityPlan plan_;
  std::vector<ConvBnRelu> first_layers_;                      // [stream]
  std::vector<std::vector<ExtendedInceptionBlock>> encoders_;  // [stream][layer - 2]
  ExtendedInceptionBlock bridge_{nullptr};
  std::vector<torch::nn::ConvTranspose2d> upsamplers_;
  std::vector<ExtendedInceptionBlock> decoders_;
  torch::nn::Conv2d head_{nullptr};
  // needed_[k][s]: whether the output of layer k+1, stream s+1 is a dense
  // source of some later layer or of the bridge.
  std::vector<std::vector<bool>> needed_;
};
TORCH_MODULE(IvdNet);

IvdNet build_model(const ModelConfig& config);

std::int64_t parameter_count(const IvdNet& model);

/// One (batch, 1, H, W) tensor per modality.
std::vector<torch::Tensor> input_tensors(const data::SliceBatch& batch,
                                         torch::Dtype dtype = torch::kFloat32);
/// (batch, H, W) int64 class indices.
torch::Tensor label_tensor(const data::SliceBatch& batch);

}  // namespace ivdnet::model
