#pragma once

#include <torch/torch.h>

#include <optional>
#include <vector>

#include "shipsr/blocks.hpp"
#include "shipsr/diffusion.hpp"

namespace shipsr {

struct DenoiserConfig {
  int latent_channels = 3;
  int base_channels = 32;
  std::vector<int> channel_mult{1, 2, 2};
  int time_dim = 64;
  int text_len = 16;
  int text_dim = 64;

  int depth() const { return static_cast<int>(channel_mult.size()); }
  std::vector<int> scale_channels() const;
};

// Time-conditional U-Net noise predictor. Scale s (resolution h/2^s) has one
// residual block on the way down and one on the way up; both are modulated by
// the scale-s SFT pair when conditioning is supplied. Text enters through
// cross-attention at the bottleneck; without text the registered null
// embedding is used.
struct UNetDenoiserImpl : nn::Module {
  explicit UNetDenoiserImpl(const DenoiserConfig& config);

  torch::Tensor forward(const torch::Tensor& z_t, const torch::Tensor& t, const MultiScaleFeatures* cond,
                        const std::optional<torch::Tensor>& text);

  DenoiserConfig config;
  nn::Linear time_fc1{nullptr}, time_fc2{nullptr};
  nn::Conv2d conv_in{nullptr}, conv_out{nullptr};
  nn::ModuleList down_blocks, downsamplers, up_blocks, upsamplers;
  ResBlock mid1{nullptr}, mid2{nullptr};
  CrossAttention mid_attn{nullptr};
  nn::GroupNorm norm_out{nullptr};
  torch::Tensor null_text;
};
TORCH_MODULE(UNetDenoiser);

torch::Tensor predict_eps(const torch::Tensor& z_t, const torch::Tensor& t, const MultiScaleFeatures* cond,
                          const std::optional<torch::Tensor>& text, UNetDenoiser& net);

}  // namespace shipsr
