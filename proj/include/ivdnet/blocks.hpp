#pragma once

#include <array>

#include <torch/torch.h>

namespace ivdnet::model {

enum class BlockVariant { standard, asymmetric };

/// While alive, records on the current thread the sign pattern of every ReLU
/// input and the winner index of every max-pooling window of the forward
/// passes run through this library. Two forward passes that produce equal
/// patterns evaluate the same piecewise-linear branch of the network.
class ActivationPatternProbe {
public:
  ActivationPatternProbe();
  ~ActivationPatternProbe();
  ActivationPatternProbe(const ActivationPatternProbe&) = delete;
  ActivationPatternProbe& operator=(const ActivationPatternProbe&) = delete;

  /// Takes the patterns recorded so far and starts a fresh record.
  std::vector<torch::Tensor> take();

  static ActivationPatternProbe* active();
  void record(torch::Tensor pattern) { patterns_.push_back(std::move(pattern)); }

private:
  ActivationPatternProbe* previous_;
  std::vector<torch::Tensor> patterns_;
};

/// ReLU that reports to an active probe.
torch::Tensor probed_relu(const torch::Tensor& x);
/// 2x2 stride-2 max-pooling that reports to an active probe.
torch::Tensor probed_max_pool(const torch::Tensor& x);

/// Convolution -> batch normalization -> ReLU. Padding keeps the spatial
/// size for odd kernels.
struct ConvBnReluOptions {
  int in_channels = 1;
  int out_channels = 1;
  std::array<int, 2> kernel{3, 3};    // (height, width)
  std::array<int, 2> dilation{1, 1};
};

class ConvBnReluImpl : public torch::nn::Module {
public:
  explicit ConvBnReluImpl(const ConvBnReluOptions& options);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d conv{nullptr};
  torch::nn::BatchNorm2d norm{nullptr};
};
TORCH_MODULE(ConvBnRelu);

/// Inception module with two extra dilated branches:
///
///   in -> 1x1 ---------------------------------+
///   in -> 1x1 -> 3x3 --------------------------+
///   in -> 1x1 -> 3x3 (dilation d0) ------------+--> concat -> 1x1 -> out
///   in -> 1x1 -> 3x3 (dilation d1) ------------+
///
/// Every branch reduces to max(1, out/4) channels. The asymmetric variant
/// replaces each 3x3 by 1x3 followed by 3x1 (same dilation). There is no
/// pooling branch.
class ExtendedInceptionBlockImpl : public torch::nn::Module {
public:
  ExtendedInceptionBlockImpl(int in_channels, int out_channels, BlockVariant variant,
                             std::array<int, 2> dilation_rates);
  torch::Tensor forward(const torch::Tensor& x);

  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  BlockVariant variant() const { return variant_; }

private:
  int in_channels_;
  int out_channels_;
  BlockVariant variant_;
  torch::nn::Sequential pointwise{nullptr};
  torch::nn::Sequential spatial{nullptr};
  torch::nn::Sequential dilated_near{nullptr};
  torch::nn::Sequential dilated_far{nullptr};
  ConvBnRelu project{nullptr};
};
TORCH_MODULE(ExtendedInceptionBlock);

/// Validating factory; throws ValidationError for non-positive channel
/// counts or dilation rates.
ExtendedInceptionBlock extended_inception_block(int in_channels, int out_channels,
                                                BlockVariant variant,
                                                std::array<int, 2> dilation_rates = {2, 4});

/// Number of trainable scalars.
std::int64_t parameter_count(const torch::nn::Module& module);

}  // namespace ivdnet::model
