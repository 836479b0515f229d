#include "shipsr/tensor_image.hpp"

#include <cstring>

#include "shipsr/errors.hpp"

namespace shipsr {

torch::Tensor to_tensor(const Image& image) {
  auto hwc = torch::from_blob(const_cast<float*>(image.pixels.data()),
                              {image.height, image.width, Image::kChannels}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous();
}

torch::Tensor to_batch(const std::vector<const Image*>& images) {
  if (images.empty()) throw DimensionError("cannot batch zero images");
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const Image* im : images) {
    if (im->height != images.front()->height || im->width != images.front()->width) {
      throw DimensionError("batched images must share one size");
    }
    parts.push_back(to_tensor(*im));
  }
  return torch::stack(parts);
}

torch::Tensor to_batch(const std::vector<Image>& images) {
  std::vector<const Image*> ptrs;
  ptrs.reserve(images.size());
  for (const auto& im : images) ptrs.push_back(&im);
  return to_batch(ptrs);
}

Image to_image(const torch::Tensor& chw) {
  if (chw.dim() != 3 || chw.size(0) != Image::kChannels) {
    throw DimensionError("expected a [3, H, W] tensor");
  }
  auto hwc = chw.detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
  Image out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)));
  std::memcpy(out.pixels.data(), hwc.data_ptr<float>(), out.pixels.size() * sizeof(float));
  return out;
}

std::vector<Image> to_images(const torch::Tensor& bchw) {
  if (bchw.dim() != 4) throw DimensionError("expected a [B, 3, H, W] tensor");
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(bchw.size(0)));
  for (std::int64_t i = 0; i < bchw.size(0); ++i) out.push_back(to_image(bchw[i]));
  return out;
}

}  // namespace shipsr
