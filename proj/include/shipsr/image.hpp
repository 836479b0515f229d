#pragma once

#include <cstddef>
#include <vector>

namespace shipsr {

// Real-valued RGB image, row-major with interleaved channels. Values are
// nominally in [0,1]; intermediate results may leave that range.
struct Image {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, float fill = 0.0f);

  static Image constant(int h, int w, float value) { return Image(h, w, value); }

  float& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
  }

  std::size_t size() const { return pixels.size(); }
  bool empty() const { return pixels.empty(); }

  bool operator==(const Image&) const = default;
};

void clamp_unit(Image& image);

// Tiles images left-to-right, top-to-bottom; every cell must share one size.
Image tile_grid(const std::vector<std::vector<Image>>& rows, int gap = 2, float gap_value = 1.0f);

}  // namespace shipsr
