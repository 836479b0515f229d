#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "shipsr/image.hpp"

namespace shipsr {

// 8-bit RGB PNG. Reading maps code q to q/255; writing clamps to [0,1] and
// quantises with round-half-up, q = floor(255 v + 0.5).
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(const std::vector<std::uint8_t>& bytes);

std::uint8_t quantize_unit(float value);

}  // namespace shipsr
