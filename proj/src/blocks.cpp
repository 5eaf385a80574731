#include "ivdnet/blocks.hpp"

#include <algorithm>

#include "ivdnet/error.hpp"

namespace ivdnet::model {

namespace {
thread_local ActivationPatternProbe* current_probe = nullptr;
}

ActivationPatternProbe::ActivationPatternProbe() : previous_(current_probe) { current_probe = this; }
ActivationPatternProbe::~ActivationPatternProbe() { current_probe = previous_; }
ActivationPatternProbe* ActivationPatternProbe::active() { return current_probe; }

std::vector<torch::Tensor> ActivationPatternProbe::take() {
  std::vector<torch::Tensor> out;
  out.swap(patterns_);
  return out;
}

torch::Tensor probed_relu(const torch::Tensor& x) {
  if (auto* probe = ActivationPatternProbe::active()) probe->record((x > 0).detach());
  return torch::relu(x);
}

torch::Tensor probed_max_pool(const torch::Tensor& x) {
  if (auto* probe = ActivationPatternProbe::active()) {
    auto [values, indices] = torch::max_pool2d_with_indices(x, {2, 2}, {2, 2});
    probe->record(indices.detach());
    return values;
  }
  return torch::max_pool2d(x, {2, 2}, {2, 2});
}

ConvBnReluImpl::ConvBnReluImpl(const ConvBnReluOptions& o) {
  const std::vector<int64_t> kernel{o.kernel[0], o.kernel[1]};
  const std::vector<int64_t> dilation{o.dilation[0], o.dilation[1]};
  const std::vector<int64_t> padding{o.dilation[0] * (o.kernel[0] - 1) / 2,
                                     o.dilation[1] * (o.kernel[1] - 1) / 2};
  // The bias would be cancelled by the normalization that follows.
  conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(o.in_channels, o.out_channels, kernel)
                                                       .padding(padding)
                                                       .dilation(dilation)
                                                       .bias(false)));
  norm = register_module("norm", torch::nn::BatchNorm2d(o.out_channels));
}

torch::Tensor ConvBnReluImpl::forward(const torch::Tensor& x) {
  return probed_relu(norm->forward(conv->forward(x)));
}

namespace {

// A 3x3 stage at the given dilation, factorized when asked.
void append_spatial(torch::nn::Sequential& seq, int channels, int dilation, BlockVariant variant) {
  if (variant == BlockVariant::standard) {
    seq->push_back(ConvBnRelu(ConvBnReluOptions{channels, channels, {3, 3}, {dilation, dilation}}));
  } else {
    seq->push_back(ConvBnRelu(ConvBnReluOptions{channels, channels, {1, 3}, {1, dilation}}));
    seq->push_back(ConvBnRelu(ConvBnReluOptions{channels, channels, {3, 1}, {dilation, 1}}));
  }
}

}  // namespace

ExtendedInceptionBlockImpl::ExtendedInceptionBlockImpl(int in_channels, int out_channels,
                                                       BlockVariant variant,
                                                       std::array<int, 2> dilation_rates)
    : in_channels_(in_channels), out_channels_(out_channels), variant_(variant) {
  const int reduced = std::max(1, out_channels / 4);
  auto reduce = [&] { return ConvBnRelu(ConvBnReluOptions{in_channels, reduced, {1, 1}, {1, 1}}); };

  pointwise = torch::nn::Sequential(reduce());
  spatial = torch::nn::Sequential(reduce());
  append_spatial(spatial, reduced, 1, variant);
  dilated_near = torch::nn::Sequential(reduce());
  append_spatial(dilated_near, reduced, dilation_rates[0], variant);
  dilated_far = torch::nn::Sequential(reduce());
  append_spatial(dilated_far, reduced, dilation_rates[1], variant);
  project = ConvBnRelu(ConvBnReluOptions{4 * reduced, out_channels, {1, 1}, {1, 1}});

  register_module("pointwise", pointwise);
  register_module("spatial", spatial);
  register_module("dilated_near", dilated_near);
  register_module("dilated_far", dilated_far);
  register_module("project", project);
}

torch::Tensor ExtendedInceptionBlockImpl::forward(const torch::Tensor& x) {
  auto branches = torch::cat({pointwise->forward(x), spatial->forward(x), dilated_near->forward(x),
                              dilated_far->forward(x)},
                             1);
  return project->forward(branches);
}

ExtendedInceptionBlock extended_inception_block(int in_channels, int out_channels,
                                                BlockVariant variant,
                                                std::array<int, 2> dilation_rates) {
  if (in_channels < 1 || out_channels < 1)
    throw ValidationError("inception block channels must be >= 1, got " +
                          std::to_string(in_channels) + " -> " + std::to_string(out_channels));
  if (dilation_rates[0] < 1 || dilation_rates[1] < 1)
    throw ValidationError("dilation rates must be >= 1");
  return ExtendedInceptionBlock(in_channels, out_channels, variant, dilation_rates);
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t total = 0;
  for (const auto& p : module.parameters())
    if (p.requires_grad()) total += p.numel();
  return total;
}

}  // namespace ivdnet::model
