#pragma once

#include <torch/torch.h>

#include <string>

#include "shipsr/blocks.hpp"

namespace shipsr {

enum class LatentMode { Identity, Learned };

LatentMode parse_latent_mode(const std::string& name);
std::string to_string(LatentMode mode);

struct AutoencoderConfig {
  LatentMode mode = LatentMode::Identity;
  int latent_channels = 4;  // forced to 3 in identity mode
  int down = 4;             // power of two; forced to 1 in identity mode
  int hidden = 32;

  int channels() const { return mode == LatentMode::Identity ? 3 : latent_channels; }
  int downsampling() const { return mode == LatentMode::Identity ? 1 : down; }
};

// Frozen latent autoencoder. Identity mode is pixel space (z = x). Learned
// mode packs down x down pixel blocks into channels (space-to-depth), runs a
// few residual convolutions at latent resolution and unpacks on the way back.
// Latents are normalised by a per-channel shift and a global scale measured
// after pre-training.
struct LatentAutoencoderImpl : nn::Module {
  explicit LatentAutoencoderImpl(const AutoencoderConfig& config);

  // x in [0,1], [B, 3, H, W] -> [B, c, H/down, W/down]. No dimension checks.
  torch::Tensor encode_raw(const torch::Tensor& x);
  // Inverse of encode_raw, without clamping.
  torch::Tensor decode_raw(const torch::Tensor& z);

  // Fits latent_shift / latent_scale to a sample of encoder outputs.
  void calibrate(const torch::Tensor& images);

  AutoencoderConfig config;
  nn::Sequential encoder{nullptr}, decoder{nullptr};
  torch::Tensor latent_shift, latent_scale;
};
TORCH_MODULE(LatentAutoencoder);

// Deterministic, gradient-free.
torch::Tensor encode_latent(const torch::Tensor& x, LatentAutoencoder& ae);
// Output clamped to [0,1].
torch::Tensor decode_latent(const torch::Tensor& z, LatentAutoencoder& ae);

}  // namespace shipsr
