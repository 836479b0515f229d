#include "shipsr/image.hpp"

#include <algorithm>

#include "shipsr/errors.hpp"

namespace shipsr {

Image::Image(int h, int w, float fill) : height(h), width(w) {
  if (h < 0 || w < 0) throw DimensionError("image dimensions must be non-negative");
  pixels.assign(static_cast<std::size_t>(h) * w * kChannels, fill);
}

void clamp_unit(Image& image) {
  for (float& v : image.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

Image tile_grid(const std::vector<std::vector<Image>>& rows, int gap, float gap_value) {
  if (rows.empty() || rows.front().empty()) throw DimensionError("grid needs at least one cell");
  const int cell_h = rows.front().front().height;
  const int cell_w = rows.front().front().width;
  const int cols = static_cast<int>(rows.front().size());
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != cols) throw DimensionError("grid rows differ in length");
    for (const auto& cell : row) {
      if (cell.height != cell_h || cell.width != cell_w) {
        throw DimensionError("grid cells differ in size");
      }
    }
  }
  const int n_rows = static_cast<int>(rows.size());
  Image grid(n_rows * cell_h + (n_rows + 1) * gap, cols * cell_w + (cols + 1) * gap, gap_value);
  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const Image& cell = rows[r][c];
      const int oy = gap + r * (cell_h + gap);
      const int ox = gap + c * (cell_w + gap);
      for (int y = 0; y < cell_h; ++y) {
        for (int x = 0; x < cell_w; ++x) {
          for (int ch = 0; ch < Image::kChannels; ++ch) {
            grid.at(oy + y, ox + x, ch) = std::clamp(cell.at(y, x, ch), 0.0f, 1.0f);
          }
        }
      }
    }
  }
  return grid;
}

}  // namespace shipsr
