#include "shipsr/blocks.hpp"

#include <cmath>

#include "shipsr/conditioning.hpp"

namespace shipsr {

int group_count(int channels) {
  for (int g = 8; g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

torch::Tensor sinusoidal_embedding(const torch::Tensor& t, int dim) {
  const int half = dim / 2;
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto freqs = torch::exp(-std::log(10000.0) * torch::arange(half, opts) / std::max(half, 1));
  auto args = t.to(torch::kFloat64).unsqueeze(1) * freqs.unsqueeze(0);
  auto emb = torch::cat({torch::sin(args), torch::cos(args)}, 1);
  if (dim % 2 == 1) emb = torch::cat({emb, torch::zeros({t.size(0), 1}, opts)}, 1);
  return emb.to(torch::kFloat32);
}

ResBlockImpl::ResBlockImpl(int in_channels, int out_channels, int emb_dim) {
  norm1 = register_module("norm1", nn::GroupNorm(group_count(in_channels), in_channels));
  conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 3).padding(1)));
  emb_proj = register_module("emb_proj", nn::Linear(emb_dim, out_channels));
  norm2 = register_module("norm2", nn::GroupNorm(group_count(out_channels), out_channels));
  conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(out_channels, out_channels, 3).padding(1)));
  if (in_channels != out_channels) {
    skip = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in_channels, out_channels, 1)));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& emb, const SftPair* sft) {
  auto h = conv1(torch::silu(norm1(x)));
  h = h + emb_proj(torch::silu(emb)).unsqueeze(-1).unsqueeze(-1);
  if (sft != nullptr) h = sft_modulate(h, sft->gamma, sft->beta);
  h = conv2(torch::silu(norm2(h)));
  return (skip ? skip(x) : x) + h;
}

DownsampleImpl::DownsampleImpl(int channels) {
  conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).stride(2).padding(1)));
}

torch::Tensor DownsampleImpl::forward(const torch::Tensor& x) { return conv(x); }

UpsampleImpl::UpsampleImpl(int channels) {
  conv = register_module("conv", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)));
}

torch::Tensor UpsampleImpl::forward(const torch::Tensor& x) {
  namespace F = torch::nn::functional;
  auto up = F::interpolate(x, F::InterpolateFuncOptions()
                                  .scale_factor(std::vector<double>{2.0, 2.0})
                                  .mode(torch::kNearest));
  return conv(up);
}

CrossAttentionImpl::CrossAttentionImpl(int channels_, int context_dim) : channels(channels_) {
  norm = register_module("norm", nn::GroupNorm(group_count(channels), channels));
  to_q = register_module("to_q", nn::Linear(nn::LinearOptions(channels, channels).bias(false)));
  to_k = register_module("to_k", nn::Linear(nn::LinearOptions(context_dim, channels).bias(false)));
  to_v = register_module("to_v", nn::Linear(nn::LinearOptions(context_dim, channels).bias(false)));
  to_out = register_module("to_out", nn::Linear(channels, channels));
  torch::NoGradGuard no_grad;
  to_out->weight.zero_();
  to_out->bias.zero_();
}

torch::Tensor CrossAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& context) {
  const auto b = x.size(0);
  const auto h = x.size(2);
  const auto w = x.size(3);
  auto tokens = norm(x).flatten(2).transpose(1, 2);  // [B, HW, C]
  auto q = to_q(tokens);
  auto k = to_k(context);
  auto v = to_v(context);
  auto attn = torch::softmax(torch::bmm(q, k.transpose(1, 2)) / std::sqrt(static_cast<double>(channels)), -1);
  auto out = to_out(torch::bmm(attn, v));
  return x + out.transpose(1, 2).reshape({b, channels, h, w});
}

void freeze(nn::Module& module) {
  for (auto& p : module.parameters()) {
    p.set_requires_grad(false);
    p.mutable_grad() = torch::Tensor();
  }
}

double gradient_norm(const nn::Module& module) {
  double sq = 0.0;
  for (const auto& p : module.parameters()) {
    if (p.grad().defined()) sq += p.grad().to(torch::kFloat64).pow(2).sum().item<double>();
  }
  return std::sqrt(sq);
}

std::int64_t parameter_count(const nn::Module& module, bool trainable_only) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) {
    if (!trainable_only || p.requires_grad()) n += p.numel();
  }
  return n;
}

}  // namespace shipsr
