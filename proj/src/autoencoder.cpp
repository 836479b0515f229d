#include "shipsr/autoencoder.hpp"

#include "shipsr/errors.hpp"

namespace shipsr {

LatentMode parse_latent_mode(const std::string& name) {
  if (name == "identity") return LatentMode::Identity;
  if (name == "learned") return LatentMode::Learned;
  throw ArgumentError("unknown latent mode '" + name + "'");
}

std::string to_string(LatentMode mode) { return mode == LatentMode::Identity ? "identity" : "learned"; }

namespace {

struct PlainResidualImpl : nn::Module {
  explicit PlainResidualImpl(int channels) {
    conv1 = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)));
    conv2 = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1)));
  }
  torch::Tensor forward(const torch::Tensor& x) { return x + conv2(torch::silu(conv1(torch::silu(x)))); }

  nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(PlainResidual);

constexpr int kResidualBlocks = 2;

}  // namespace

LatentAutoencoderImpl::LatentAutoencoderImpl(const AutoencoderConfig& cfg) : config(cfg) {
  const int c = config.channels();
  latent_shift = register_buffer("latent_shift", torch::zeros({1, c, 1, 1}));
  latent_scale = register_buffer("latent_scale", torch::ones({1}));
  if (config.mode == LatentMode::Identity) return;

  const int d = config.down;
  if (d < 2 || (d & (d - 1)) != 0) throw ConfigurationError("autoencoder down factor must be a power of two >= 2");
  const int h = config.hidden;
  const int packed = 3 * d * d;

  encoder = nn::Sequential();
  encoder->push_back(nn::PixelUnshuffle(d));
  encoder->push_back(nn::Conv2d(nn::Conv2dOptions(packed, h, 3).padding(1)));
  for (int i = 0; i < kResidualBlocks; ++i) encoder->push_back(PlainResidual(h));
  encoder->push_back(nn::SiLU());
  encoder->push_back(nn::Conv2d(nn::Conv2dOptions(h, c, 1)));

  decoder = nn::Sequential();
  decoder->push_back(nn::Conv2d(nn::Conv2dOptions(c, h, 3).padding(1)));
  for (int i = 0; i < kResidualBlocks; ++i) decoder->push_back(PlainResidual(h));
  decoder->push_back(nn::SiLU());
  decoder->push_back(nn::Conv2d(nn::Conv2dOptions(h, packed, 3).padding(1)));
  decoder->push_back(nn::PixelShuffle(d));
  register_module("encoder", encoder);
  register_module("decoder", decoder);
}

torch::Tensor LatentAutoencoderImpl::encode_raw(const torch::Tensor& x) {
  if (config.mode == LatentMode::Identity) return x;
  return (encoder->forward(x * 2.0 - 1.0) - latent_shift) * latent_scale;
}

torch::Tensor LatentAutoencoderImpl::decode_raw(const torch::Tensor& z) {
  if (config.mode == LatentMode::Identity) return z;
  return (decoder->forward(z / latent_scale + latent_shift) + 1.0) * 0.5;
}

void LatentAutoencoderImpl::calibrate(const torch::Tensor& images) {
  if (config.mode == LatentMode::Identity) return;
  torch::NoGradGuard no_grad;
  auto raw = encoder->forward(images * 2.0 - 1.0);
  latent_shift.copy_(raw.mean({0, 2, 3}, true));
  auto centred = raw - latent_shift;
  latent_scale.fill_(1.0 / std::max(centred.std().item<double>(), 1e-6));
}

namespace {

void check_divisible(const torch::Tensor& x, int down, const char* what) {
  if (x.dim() != 4) throw DimensionError(std::string(what) + " must be a [B, C, H, W] tensor");
  if (x.size(2) % down != 0 || x.size(3) % down != 0) {
    throw DimensionError(std::string(what) + " dims not divisible by the autoencoder factor " +
                         std::to_string(down));
  }
}

}  // namespace

torch::Tensor encode_latent(const torch::Tensor& x, LatentAutoencoder& ae) {
  check_divisible(x, ae->config.downsampling(), "image");
  if (x.size(1) != 3) throw DimensionError("image must have 3 channels");
  torch::NoGradGuard no_grad;
  return ae->encode_raw(x);
}

torch::Tensor decode_latent(const torch::Tensor& z, LatentAutoencoder& ae) {
  if (z.dim() != 4 || z.size(1) != ae->config.channels()) {
    throw DimensionError("latent must be [B, c, h, w] with the autoencoder's channel count");
  }
  torch::NoGradGuard no_grad;
  return ae->decode_raw(z).clamp(0.0, 1.0);
}

}  // namespace shipsr
