#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "shipsr/blocks.hpp"
#include "shipsr/diffusion.hpp"

namespace shipsr {

// output = gamma * F + beta. gamma/beta match F, or have one channel and
// broadcast across F's channels.
torch::Tensor sft_modulate(const torch::Tensor& features, const torch::Tensor& gamma, const torch::Tensor& beta);

struct ConditioningConfig {
  int num_classes = 4;
  int class_dim = 64;
  int time_dim = 64;
  std::int64_t num_timesteps = 200;
  int latent_channels = 3;
  // Channel count per scale; must equal the denoiser's.
  std::vector<int> scale_channels{32, 64, 64};
  bool zero_init_heads = true;

  int condition_dim() const { return class_dim + time_dim; }
};

// Class table (K x class_dim) and the timestep MLP. Produces b.
struct ConditionEmbeddingImpl : nn::Module {
  ConditionEmbeddingImpl(int num_classes, int class_dim, int time_dim);

  torch::Tensor class_part(const torch::Tensor& class_probs);
  torch::Tensor time_part(const torch::Tensor& t);
  torch::Tensor forward(const torch::Tensor& class_probs, const torch::Tensor& t);

  torch::Tensor class_table;
  nn::Linear time_fc1{nullptr}, time_fc2{nullptr};
  int time_dim;
};
TORCH_MODULE(ConditionEmbedding);

// Validates the probability rows (sum to 1 within 1e-5, non-negative) and the
// timestep range before embedding.
torch::Tensor build_condition_vector(const torch::Tensor& class_probs, const torch::Tensor& t,
                                     ConditionEmbedding& tables, std::int64_t num_timesteps);

// Class- and time-aware encoder: a U-Net encoder over the LR latent with b
// injected into every residual block, followed by per-scale SFT heads.
struct ConditionEncoderImpl : nn::Module {
  explicit ConditionEncoderImpl(const ConditioningConfig& config);

  torch::Tensor condition_vector(const torch::Tensor& class_probs, const torch::Tensor& t);
  MultiScaleFeatures forward(const torch::Tensor& b, const torch::Tensor& z_lr);

  // Re-draws the SFT head weights (normally zero at init) from N(0, std^2).
  void randomize_heads(double std = 0.02);

  ConditioningConfig config;
  ConditionEmbedding embedding{nullptr};
  nn::Conv2d conv_in{nullptr};
  nn::ModuleList blocks, downsamplers, gamma_heads, beta_heads;
};
TORCH_MODULE(ConditionEncoder);

MultiScaleFeatures encode_conditions(const torch::Tensor& b, const torch::Tensor& z_lr, ConditionEncoder& encoder);

}  // namespace shipsr
