#pragma once

#include <torch/torch.h>

#include "shipsr/diffusion.hpp"

namespace shipsr {

namespace nn = torch::nn;

// GroupNorm group count: the largest divisor of channels not above 8.
int group_count(int channels);

// Transformer-style sinusoidal embedding of integer timesteps, [B] -> [B, dim].
torch::Tensor sinusoidal_embedding(const torch::Tensor& t, int dim);

// Pre-activation residual block. The embedding is projected and added to the
// features after the first convolution; an optional SFT pair then modulates
// those intermediate features.
struct ResBlockImpl : nn::Module {
  ResBlockImpl(int in_channels, int out_channels, int emb_dim);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& emb, const SftPair* sft = nullptr);

  nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  nn::Linear emb_proj{nullptr};
};
TORCH_MODULE(ResBlock);

struct DownsampleImpl : nn::Module {
  explicit DownsampleImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Downsample);

struct UpsampleImpl : nn::Module {
  explicit UpsampleImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);
  nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Upsample);

// Single-head cross-attention from spatial features to a context sequence,
// added residually. The output projection starts at zero.
struct CrossAttentionImpl : nn::Module {
  CrossAttentionImpl(int channels, int context_dim);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context);

  nn::GroupNorm norm{nullptr};
  nn::Linear to_q{nullptr}, to_k{nullptr}, to_v{nullptr}, to_out{nullptr};
  int channels;
};
TORCH_MODULE(CrossAttention);

// Disables gradients and drops any accumulated ones.
void freeze(nn::Module& module);
double gradient_norm(const nn::Module& module);
std::int64_t parameter_count(const nn::Module& module, bool trainable_only = false);

}  // namespace shipsr
