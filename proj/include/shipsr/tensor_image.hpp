#pragma once

#include <torch/torch.h>

#include <vector>

#include "shipsr/image.hpp"

namespace shipsr {

// [3, H, W] float tensor from an HWC image.
torch::Tensor to_tensor(const Image& image);
// [B, 3, H, W]; all images must share one size.
torch::Tensor to_batch(const std::vector<Image>& images);
torch::Tensor to_batch(const std::vector<const Image*>& images);

Image to_image(const torch::Tensor& chw);
std::vector<Image> to_images(const torch::Tensor& bchw);

}  // namespace shipsr
