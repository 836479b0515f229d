#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "shipsr/image.hpp"

namespace shipsr {

// Square blur kernel with odd side length, row-major weights.
struct BlurKernel {
  int size = 1;
  std::vector<double> weights{1.0};

  double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * size + x]; }
  double sum() const;
};

BlurKernel identity_kernel();
BlurKernel gaussian_kernel(double sigma, int size);

struct DegradationConfig {
  BlurKernel kernel = identity_kernel();
  int downscale_factor = 1;
  double noise_sigma = 0.0;
  std::optional<int> compression_quality;
  std::uint64_t seed = 0;

  // Throws ArgumentError when an invariant is violated.
  void validate() const;
};

// Per-record degradation parameters are drawn from these ranges.
struct DegradationSettings {
  double kernel_sigma_min = 0.2;
  double kernel_sigma_max = 3.0;
  int kernel_size = 21;
  int downscale_factor = 8;
  double noise_sigma = 0.0;
  std::optional<int> compression_quality;

  // Deterministic in (global_seed, record_id) only, so parallel order never matters.
  DegradationConfig for_record(std::uint64_t global_seed, std::string_view record_id) const;
};

struct ImagePair {
  Image hr;
  Image lr;
  Image reference;
};

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key);

Image center_crop(const Image& x, int side);

// blur (reflect padding) -> decimate -> noise -> optional block-DCT quantisation -> clamp.
Image apply_degradation(const Image& x, const DegradationConfig& cfg);
// Same pipeline without the final clamp to [0,1].
Image apply_degradation_unclamped(const Image& x, const DegradationConfig& cfg);

// Keys cubic convolution (a = -0.5), half-pixel centres, edge clamped.
Image bicubic_upsample(const Image& lr, int factor);
Image bicubic_resize(const Image& x, int out_h, int out_w);

Image convolve_reflect(const Image& x, const BlurKernel& kernel);
Image decimate(const Image& x, int factor);
void quantize_dct_blocks(Image& x, int quality);

ImagePair make_image_pair(const Image& source, int hr_side, const DegradationConfig& cfg);

}  // namespace shipsr
