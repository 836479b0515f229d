#include "shipsr/denoiser.hpp"

#include "shipsr/errors.hpp"

namespace shipsr {

std::vector<int> DenoiserConfig::scale_channels() const {
  std::vector<int> out;
  for (int m : channel_mult) out.push_back(base_channels * m);
  return out;
}

UNetDenoiserImpl::UNetDenoiserImpl(const DenoiserConfig& cfg) : config(cfg) {
  if (config.depth() < 1) throw ConfigurationError("denoiser depth must be >= 1");
  const auto chans = config.scale_channels();
  const int emb = config.time_dim;
  time_fc1 = register_module("time_fc1", nn::Linear(config.time_dim, emb));
  time_fc2 = register_module("time_fc2", nn::Linear(emb, emb));
  conv_in = register_module("conv_in",
                            nn::Conv2d(nn::Conv2dOptions(config.latent_channels, chans.front(), 3).padding(1)));
  int ch = chans.front();
  for (int s = 0; s < config.depth(); ++s) {
    down_blocks->push_back(ResBlock(ch, chans[s], emb));
    ch = chans[s];
    if (s + 1 < config.depth()) downsamplers->push_back(Downsample(ch));
  }
  mid1 = register_module("mid1", ResBlock(ch, ch, emb));
  mid_attn = register_module("mid_attn", CrossAttention(ch, config.text_dim));
  mid2 = register_module("mid2", ResBlock(ch, ch, emb));
  for (int s = config.depth() - 1; s >= 0; --s) {
    up_blocks->push_back(ResBlock(ch + chans[s], chans[s], emb));
    ch = chans[s];
    if (s > 0) upsamplers->push_back(Upsample(ch));
  }
  register_module("down_blocks", down_blocks);
  register_module("downsamplers", downsamplers);
  register_module("up_blocks", up_blocks);
  register_module("upsamplers", upsamplers);
  norm_out = register_module("norm_out", nn::GroupNorm(group_count(ch), ch));
  conv_out = register_module("conv_out", nn::Conv2d(nn::Conv2dOptions(ch, config.latent_channels, 3).padding(1)));
  null_text = register_buffer("null_text", torch::zeros({config.text_len, config.text_dim}));
}

torch::Tensor UNetDenoiserImpl::forward(const torch::Tensor& z_t, const torch::Tensor& t,
                                        const MultiScaleFeatures* cond, const std::optional<torch::Tensor>& text) {
  const int depth = config.depth();
  if (cond != nullptr && static_cast<int>(cond->scales()) != depth) {
    throw ConfigurationError("conditioning has " + std::to_string(cond->scales()) + " scales, denoiser depth is " +
                             std::to_string(depth));
  }
  if (z_t.dim() != 4 || z_t.size(1) != config.latent_channels) {
    throw DimensionError("z_t must be [B, c, h, w] with the configured latent channels");
  }
  const std::int64_t need = std::int64_t{1} << (depth - 1);
  if (z_t.size(2) % need != 0 || z_t.size(3) % need != 0) {
    throw DimensionError("latent grid not divisible by 2^(depth-1)");
  }
  auto sft_at = [&](int s) -> const SftPair* { return cond ? &cond->sft[static_cast<std::size_t>(s)] : nullptr; };

  auto emb = time_fc2(torch::silu(time_fc1(sinusoidal_embedding(t, config.time_dim).to(conv_in->weight.dtype()))));
  auto h = conv_in(z_t);
  std::vector<torch::Tensor> skips;
  for (int s = 0; s < depth; ++s) {
    h = down_blocks[s]->as<ResBlockImpl>()->forward(h, emb, sft_at(s));
    skips.push_back(h);
    if (s + 1 < depth) h = downsamplers[s]->as<DownsampleImpl>()->forward(h);
  }
  h = mid1->forward(h, emb);
  torch::Tensor context;
  if (text) {
    context = *text;
    if (context.dim() != 3 || context.size(0) != z_t.size(0) || context.size(2) != config.text_dim) {
      throw DimensionError("text embedding must be [B, L, text_dim]");
    }
  } else {
    context = null_text.unsqueeze(0).expand({z_t.size(0), config.text_len, config.text_dim});
  }
  h = mid_attn->forward(h, context.to(h.dtype()));
  h = mid2->forward(h, emb);
  for (int i = 0; i < depth; ++i) {
    const int s = depth - 1 - i;
    h = torch::cat({h, skips[static_cast<std::size_t>(s)]}, 1);
    h = up_blocks[i]->as<ResBlockImpl>()->forward(h, emb, sft_at(s));
    if (s > 0) h = upsamplers[i]->as<UpsampleImpl>()->forward(h);
  }
  return conv_out(torch::silu(norm_out(h)));
}

torch::Tensor predict_eps(const torch::Tensor& z_t, const torch::Tensor& t, const MultiScaleFeatures* cond,
                          const std::optional<torch::Tensor>& text, UNetDenoiser& net) {
  return net->forward(z_t, t, cond, text);
}

}  // namespace shipsr
