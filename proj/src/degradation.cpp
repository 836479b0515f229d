#include "shipsr/degradation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "shipsr/errors.hpp"

namespace shipsr {
namespace {

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

double cubic_weight(double d) {
  constexpr double a = -0.5;
  d = std::abs(d);
  if (d <= 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
  if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
  return 0.0;
}

// Standard JPEG luminance table, scaled by the libjpeg quality rule.
constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

std::array<double, 64> quant_table(int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> q{};
  for (int i = 0; i < 64; ++i) {
    q[i] = std::clamp((kLumaTable[i] * scale + 50) / 100, 1, 255);
  }
  return q;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double BlurKernel::sum() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

BlurKernel identity_kernel() { return BlurKernel{}; }

BlurKernel gaussian_kernel(double sigma, int size) {
  if (size < 1 || size % 2 == 0) throw ArgumentError("kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw ArgumentError("kernel sigma must be positive");
  BlurKernel k;
  k.size = size;
  k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
  const int r = size / 2;
  double total = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double w = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      k.weights[static_cast<std::size_t>(y + r) * size + (x + r)] = w;
      total += w;
    }
  }
  for (double& w : k.weights) w /= total;
  return k;
}

void DegradationConfig::validate() const {
  if (kernel.size < 1 || kernel.size % 2 == 0) throw ArgumentError("kernel side must be odd");
  if (kernel.weights.size() != static_cast<std::size_t>(kernel.size) * kernel.size) {
    throw ArgumentError("kernel weight count does not match its side");
  }
  if (std::abs(kernel.sum() - 1.0) > 1e-6) throw ArgumentError("kernel must sum to 1");
  if (downscale_factor < 1) throw ArgumentError("downscale_factor must be >= 1");
  if (!(noise_sigma >= 0.0)) throw ArgumentError("noise_sigma must be >= 0");
  if (compression_quality && (*compression_quality < 1 || *compression_quality > 100)) {
    throw ArgumentError("compression_quality must be in [1,100]");
  }
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(global_seed ^ splitmix64(h));
}

DegradationConfig DegradationSettings::for_record(std::uint64_t global_seed,
                                                  std::string_view record_id) const {
  const std::uint64_t seed = derive_seed(global_seed, record_id);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sigma(kernel_sigma_min, kernel_sigma_max);
  DegradationConfig cfg;
  cfg.kernel = gaussian_kernel(sigma(rng), kernel_size);
  cfg.downscale_factor = downscale_factor;
  cfg.noise_sigma = noise_sigma;
  cfg.compression_quality = compression_quality;
  cfg.seed = splitmix64(seed);
  return cfg;
}

Image center_crop(const Image& x, int side) {
  if (side < 1) throw ArgumentError("crop side must be positive");
  if (side > x.height || side > x.width) {
    throw DimensionError("crop side " + std::to_string(side) + " exceeds image " +
                         std::to_string(x.height) + "x" + std::to_string(x.width));
  }
  const int oy = (x.height - side) / 2;
  const int ox = (x.width - side) / 2;
  Image out(side, side);
  for (int y = 0; y < side; ++y) {
    const float* src = &x.pixels[(static_cast<std::size_t>(oy + y) * x.width + ox) * Image::kChannels];
    std::copy(src, src + static_cast<std::size_t>(side) * Image::kChannels,
              &out.pixels[static_cast<std::size_t>(y) * side * Image::kChannels]);
  }
  return out;
}

Image convolve_reflect(const Image& x, const BlurKernel& kernel) {
  if (kernel.size == 1) {
    Image out = x;
    for (float& v : out.pixels) v = static_cast<float>(v * kernel.weights[0]);
    return out;
  }
  const int r = kernel.size / 2;
  Image out(x.height, x.width);
  for (int y = 0; y < x.height; ++y) {
    for (int xx = 0; xx < x.width; ++xx) {
      double acc[Image::kChannels] = {0.0, 0.0, 0.0};
      for (int ky = -r; ky <= r; ++ky) {
        const int sy = reflect_index(y + ky, x.height);
        for (int kx = -r; kx <= r; ++kx) {
          const int sx = reflect_index(xx + kx, x.width);
          const double w = kernel.at(ky + r, kx + r);
          for (int c = 0; c < Image::kChannels; ++c) acc[c] += w * x.at(sy, sx, c);
        }
      }
      for (int c = 0; c < Image::kChannels; ++c) out.at(y, xx, c) = static_cast<float>(acc[c]);
    }
  }
  return out;
}

Image decimate(const Image& x, int factor) {
  if (factor < 1) throw ArgumentError("decimation factor must be >= 1");
  if (x.height % factor != 0 || x.width % factor != 0) {
    throw DimensionError("image " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                         " not divisible by factor " + std::to_string(factor));
  }
  if (factor == 1) return x;
  const int oh = x.height / factor;
  const int ow = x.width / factor;
  // Sample at the block centre: the single centre pixel for odd factors, the
  // mean of the central 2x2 for even ones.
  const int lo = (factor - 1) / 2;
  const int hi = factor / 2;
  Image out(oh, ow);
  for (int y = 0; y < oh; ++y) {
    for (int xx = 0; xx < ow; ++xx) {
      for (int c = 0; c < Image::kChannels; ++c) {
        const int by = y * factor;
        const int bx = xx * factor;
        const double v = 0.25 * (static_cast<double>(x.at(by + lo, bx + lo, c)) + x.at(by + lo, bx + hi, c) +
                                 x.at(by + hi, bx + lo, c) + x.at(by + hi, bx + hi, c));
        out.at(y, xx, c) = static_cast<float>(v);
      }
    }
  }
  return out;
}

void quantize_dct_blocks(Image& x, int quality) {
  if (quality < 1 || quality > 100) throw ArgumentError("quality must be in [1,100]");
  const auto q = quant_table(quality);
  double basis[8][8];
  for (int k = 0; k < 8; ++k) {
    const double ck = k == 0 ? std::sqrt(0.125) : 0.5;
    for (int n = 0; n < 8; ++n) basis[k][n] = ck * std::cos((2 * n + 1) * k * std::numbers::pi / 16.0);
  }
  for (int by = 0; by < x.height; by += 8) {
    for (int bx = 0; bx < x.width; bx += 8) {
      for (int c = 0; c < Image::kChannels; ++c) {
        double block[8][8];
        for (int y = 0; y < 8; ++y) {
          for (int xx = 0; xx < 8; ++xx) {
            const int sy = std::min(by + y, x.height - 1);
            const int sx = std::min(bx + xx, x.width - 1);
            block[y][xx] = x.at(sy, sx, c) * 255.0 - 128.0;
          }
        }
        double coef[8][8];
        for (int u = 0; u < 8; ++u) {
          for (int v = 0; v < 8; ++v) {
            double s = 0.0;
            for (int y = 0; y < 8; ++y) {
              for (int xx = 0; xx < 8; ++xx) s += basis[u][y] * basis[v][xx] * block[y][xx];
            }
            const double step = q[u * 8 + v];
            coef[u][v] = std::round(s / step) * step;
          }
        }
        for (int y = 0; y < 8 && by + y < x.height; ++y) {
          for (int xx = 0; xx < 8 && bx + xx < x.width; ++xx) {
            double s = 0.0;
            for (int u = 0; u < 8; ++u) {
              for (int v = 0; v < 8; ++v) s += basis[u][y] * basis[v][xx] * coef[u][v];
            }
            x.at(by + y, bx + xx, c) = static_cast<float>((s + 128.0) / 255.0);
          }
        }
      }
    }
  }
}

Image apply_degradation_unclamped(const Image& x, const DegradationConfig& cfg) {
  cfg.validate();
  if (x.height % cfg.downscale_factor != 0 || x.width % cfg.downscale_factor != 0) {
    throw DimensionError("image " + std::to_string(x.height) + "x" + std::to_string(x.width) +
                         " not divisible by factor " + std::to_string(cfg.downscale_factor));
  }
  Image out = decimate(convolve_reflect(x, cfg.kernel), cfg.downscale_factor);
  if (cfg.noise_sigma > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (float& v : out.pixels) v = static_cast<float>(v + noise(rng));
  }
  if (cfg.compression_quality) quantize_dct_blocks(out, *cfg.compression_quality);
  return out;
}

Image apply_degradation(const Image& x, const DegradationConfig& cfg) {
  Image out = apply_degradation_unclamped(x, cfg);
  clamp_unit(out);
  return out;
}

Image bicubic_resize(const Image& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw ArgumentError("output size must be positive");
  if (x.empty()) throw DimensionError("cannot resize an empty image");
  struct Tap {
    int index[4];
    double weight[4];
  };
  auto taps = [](int out_n, int in_n) {
    std::vector<Tap> t(out_n);
    const double scale = static_cast<double>(in_n) / out_n;
    for (int i = 0; i < out_n; ++i) {
      const double src = (i + 0.5) * scale - 0.5;
      const int base = static_cast<int>(std::floor(src));
      double total = 0.0;
      for (int k = 0; k < 4; ++k) {
        const int s = base - 1 + k;
        t[i].index[k] = std::clamp(s, 0, in_n - 1);
        t[i].weight[k] = cubic_weight(src - s);
        total += t[i].weight[k];
      }
      for (double& w : t[i].weight) w /= total;
    }
    return t;
  };
  const auto ty = taps(out_h, x.height);
  const auto tx = taps(out_w, x.width);
  // Separable: rows first into a height-preserving buffer, then columns.
  Image tmp(x.height, out_w);
  for (int y = 0; y < x.height; ++y) {
    for (int xx = 0; xx < out_w; ++xx) {
      for (int c = 0; c < Image::kChannels; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += tx[xx].weight[k] * x.at(y, tx[xx].index[k], c);
        tmp.at(y, xx, c) = static_cast<float>(acc);
      }
    }
  }
  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int xx = 0; xx < out_w; ++xx) {
      for (int c = 0; c < Image::kChannels; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += ty[y].weight[k] * tmp.at(ty[y].index[k], xx, c);
        out.at(y, xx, c) = static_cast<float>(acc);
      }
    }
  }
  clamp_unit(out);
  return out;
}

Image bicubic_upsample(const Image& lr, int factor) {
  if (factor < 1) throw ArgumentError("upsample factor must be >= 1");
  if (factor == 1) {
    Image out = lr;
    clamp_unit(out);
    return out;
  }
  return bicubic_resize(lr, lr.height * factor, lr.width * factor);
}

ImagePair make_image_pair(const Image& source, int hr_side, const DegradationConfig& cfg) {
  ImagePair pair;
  pair.hr = center_crop(source, hr_side);
  pair.lr = apply_degradation(pair.hr, cfg);
  pair.reference = bicubic_upsample(pair.lr, cfg.downscale_factor);
  return pair;
}

}  // namespace shipsr
