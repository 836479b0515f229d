#include "shipsr/conditioning.hpp"

#include "shipsr/errors.hpp"

namespace shipsr {

torch::Tensor sft_modulate(const torch::Tensor& features, const torch::Tensor& gamma, const torch::Tensor& beta) {
  auto compatible = [&](const torch::Tensor& m) {
    if (m.dim() != features.dim()) return false;
    for (std::int64_t d = 0; d < features.dim(); ++d) {
      if (m.size(d) == features.size(d)) continue;
      if (d == 1 && m.size(d) == 1) continue;
      return false;
    }
    return true;
  };
  if (!compatible(gamma) || !compatible(beta)) {
    throw DimensionError("SFT gamma/beta shape does not match the feature map");
  }
  return gamma * features + beta;
}

ConditionEmbeddingImpl::ConditionEmbeddingImpl(int num_classes, int class_dim, int time_dim_)
    : time_dim(time_dim_) {
  if (num_classes < 1) throw ArgumentError("need at least one class");
  class_table = register_parameter("class_table", torch::randn({num_classes, class_dim}) * 0.5);
  time_fc1 = register_module("time_fc1", nn::Linear(time_dim, time_dim));
  time_fc2 = register_module("time_fc2", nn::Linear(time_dim, time_dim));
}

torch::Tensor ConditionEmbeddingImpl::class_part(const torch::Tensor& class_probs) {
  return torch::matmul(class_probs.to(class_table.dtype()), class_table);
}

torch::Tensor ConditionEmbeddingImpl::time_part(const torch::Tensor& t) {
  auto s = sinusoidal_embedding(t, time_dim).to(time_fc1->weight.dtype());
  return time_fc2(torch::silu(time_fc1(s)));
}

torch::Tensor ConditionEmbeddingImpl::forward(const torch::Tensor& class_probs, const torch::Tensor& t) {
  return torch::cat({class_part(class_probs), time_part(t)}, 1);
}

torch::Tensor build_condition_vector(const torch::Tensor& class_probs, const torch::Tensor& t,
                                     ConditionEmbedding& tables, std::int64_t num_timesteps) {
  if (class_probs.dim() != 2 || class_probs.size(1) != tables->class_table.size(0)) {
    throw ArgumentError("class probabilities must be [B, K] with K matching the class table");
  }
  if (t.dim() != 1 || t.size(0) != class_probs.size(0)) {
    throw ArgumentError("need one timestep per probability row");
  }
  {
    torch::NoGradGuard no_grad;
    auto p = class_probs.to(torch::kFloat64);
    const double worst = (p.sum(1) - 1.0).abs().max().item<double>();
    if (!(worst <= 1e-5) || (p < 0).any().item<bool>()) {
      throw ArgumentError("class probabilities must be non-negative and sum to 1");
    }
    if (t.numel() > 0 && (t.min().item<std::int64_t>() < 0 || t.max().item<std::int64_t>() >= num_timesteps)) {
      throw ArgumentError("timestep out of range");
    }
  }
  return tables->forward(class_probs, t);
}

ConditionEncoderImpl::ConditionEncoderImpl(const ConditioningConfig& cfg) : config(cfg) {
  if (config.scale_channels.empty()) throw ConfigurationError("condition encoder needs at least one scale");
  embedding = register_module("embedding", ConditionEmbedding(config.num_classes, config.class_dim, config.time_dim));
  const int emb = config.condition_dim();
  conv_in = register_module(
      "conv_in", nn::Conv2d(nn::Conv2dOptions(config.latent_channels, config.scale_channels.front(), 3).padding(1)));
  int ch = config.scale_channels.front();
  for (std::size_t s = 0; s < config.scale_channels.size(); ++s) {
    const int out = config.scale_channels[s];
    blocks->push_back(ResBlock(ch, out, emb));
    ch = out;
    auto g = nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1));
    auto b = nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1));
    if (config.zero_init_heads) {
      torch::NoGradGuard no_grad;
      g->weight.zero_();
      g->bias.zero_();
      b->weight.zero_();
      b->bias.zero_();
    }
    gamma_heads->push_back(g);
    beta_heads->push_back(b);
    if (s + 1 < config.scale_channels.size()) downsamplers->push_back(Downsample(out));
  }
  register_module("blocks", blocks);
  register_module("downsamplers", downsamplers);
  register_module("gamma_heads", gamma_heads);
  register_module("beta_heads", beta_heads);
}

torch::Tensor ConditionEncoderImpl::condition_vector(const torch::Tensor& class_probs, const torch::Tensor& t) {
  return build_condition_vector(class_probs, t, embedding, config.num_timesteps);
}

MultiScaleFeatures ConditionEncoderImpl::forward(const torch::Tensor& b, const torch::Tensor& z_lr) {
  if (b.dim() != 2 || b.size(1) != config.condition_dim()) {
    throw DimensionError("condition vector has the wrong length");
  }
  if (z_lr.dim() != 4 || z_lr.size(1) != config.latent_channels) {
    throw DimensionError("LR latent must be [B, C, h, w] with the configured channels");
  }
  const auto scales = config.scale_channels.size();
  const std::int64_t need = std::int64_t{1} << (scales - 1);
  if (z_lr.size(2) % need != 0 || z_lr.size(3) % need != 0) {
    throw DimensionError("LR latent grid not divisible by 2^(scales-1)");
  }
  MultiScaleFeatures out;
  auto h = conv_in(z_lr);
  for (std::size_t s = 0; s < scales; ++s) {
    h = blocks[s]->as<ResBlockImpl>()->forward(h, b);
    out.features.push_back(h);
    auto gamma = 1.0 + gamma_heads[s]->as<nn::Conv2dImpl>()->forward(h);
    auto beta = beta_heads[s]->as<nn::Conv2dImpl>()->forward(h);
    out.sft.push_back({gamma, beta});
    if (s + 1 < scales) h = downsamplers[s]->as<DownsampleImpl>()->forward(h);
  }
  return out;
}

void ConditionEncoderImpl::randomize_heads(double std) {
  torch::NoGradGuard no_grad;
  for (auto* list : {&gamma_heads, &beta_heads}) {
    for (auto& m : **list) {
      auto* conv = m->as<nn::Conv2dImpl>();
      conv->weight.normal_(0.0, std);
      conv->bias.normal_(0.0, std);
    }
  }
}

MultiScaleFeatures encode_conditions(const torch::Tensor& b, const torch::Tensor& z_lr, ConditionEncoder& encoder) {
  return encoder->forward(b, z_lr);
}

}  // namespace shipsr
