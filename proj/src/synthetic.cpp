#include "shipsr/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "shipsr/degradation.hpp"
#include "shipsr/errors.hpp"
#include "shipsr/png_io.hpp"

namespace shipsr {
namespace {

struct Rgb {
  float r, g, b;
};

class Canvas {
 public:
  Canvas(Image& im, double scale) : im_(im), scale_(scale) {}

  // Coordinates are in a 64-unit design space, scaled to the image side.
  void rect(double x0, double y0, double x1, double y1, Rgb c) {
    const int ax = px(x0), ay = px(y0), bx = std::max(px(x1), ax + 1), by = std::max(px(y1), ay + 1);
    for (int y = std::max(ay, 0); y < std::min(by, im_.height); ++y) {
      for (int x = std::max(ax, 0); x < std::min(bx, im_.width); ++x) set(y, x, c);
    }
  }

  // Trapezoid hull: top edge [x0, x1], bottom edge inset by `rake`.
  void hull(double x0, double x1, double y0, double y1, double rake, Rgb c) {
    const int ay = px(y0), by = std::max(px(y1), ay + 1);
    for (int y = std::max(ay, 0); y < std::min(by, im_.height); ++y) {
      const double f = by - ay > 1 ? static_cast<double>(y - ay) / (by - ay - 1) : 0.0;
      const int ax = px(x0 + rake * f), bx = px(x1 - 0.5 * rake * f);
      for (int x = std::max(ax, 0); x < std::min(bx, im_.width); ++x) set(y, x, c);
    }
  }

  void vline(double x, double y0, double y1, Rgb c) { rect(x, y0, x + 1.0 / scale_, y1, c); }

  void set(int y, int x, Rgb c) {
    im_.at(y, x, 0) = c.r;
    im_.at(y, x, 1) = c.g;
    im_.at(y, x, 2) = c.b;
  }

  int px(double v) const { return static_cast<int>(std::lround(v * scale_)); }

 private:
  Image& im_;
  double scale_;
};

float jitter(std::mt19937_64& rng, float base, float spread) {
  std::uniform_real_distribution<float> d(-spread, spread);
  return std::clamp(base + d(rng), 0.0f, 1.0f);
}

Rgb jitter(std::mt19937_64& rng, Rgb c, float spread) {
  return {jitter(rng, c.r, spread), jitter(rng, c.g, spread), jitter(rng, c.b, spread)};
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

void background(Image& im, double horizon, std::mt19937_64& rng) {
  const Rgb sky_top = jitter(rng, {0.45f, 0.62f, 0.85f}, 0.08f);
  const Rgb sky_low = jitter(rng, {0.78f, 0.85f, 0.92f}, 0.06f);
  const Rgb sea_top = jitter(rng, {0.18f, 0.35f, 0.52f}, 0.06f);
  const Rgb sea_low = jitter(rng, {0.08f, 0.2f, 0.34f}, 0.05f);
  const int hy = static_cast<int>(std::lround(horizon * im.height / 64.0));
  for (int y = 0; y < im.height; ++y) {
    Rgb c;
    if (y < hy) {
      const float f = hy > 1 ? static_cast<float>(y) / (hy - 1) : 0.0f;
      c = {sky_top.r + f * (sky_low.r - sky_top.r), sky_top.g + f * (sky_low.g - sky_top.g),
           sky_top.b + f * (sky_low.b - sky_top.b)};
    } else {
      const float f = im.height - hy > 1 ? static_cast<float>(y - hy) / (im.height - hy - 1) : 0.0f;
      c = {sea_top.r + f * (sea_low.r - sea_top.r), sea_top.g + f * (sea_low.g - sea_top.g),
           sea_top.b + f * (sea_low.b - sea_top.b)};
    }
    for (int x = 0; x < im.width; ++x) {
      im.at(y, x, 0) = c.r;
      im.at(y, x, 1) = c.g;
      im.at(y, x, 2) = c.b;
    }
  }
}

}  // namespace

ShipStyle style_for_category(int index) {
  switch (((index % 4) + 4) % 4) {
    case 0: return ShipStyle::Tanker;
    case 1: return ShipStyle::ContainerShip;
    case 2: return ShipStyle::Tug;
    default: return ShipStyle::Passenger;
  }
}

Image render_ship(ShipStyle style, int side, std::mt19937_64& rng) {
  if (side < 16) throw ArgumentError("synthetic images need side >= 16");
  Image im(side, side);
  const double horizon = uniform(rng, 34.0, 42.0);
  background(im, horizon, rng);
  Canvas cv(im, side / 64.0);
  const double margin = (side - 64.0 * side / 72.0) / 2.0 * 64.0 / side;  // keep ships inside a centre crop
  const double water = horizon + uniform(rng, 6.0, 10.0);
  const Rgb white = jitter(rng, {0.93f, 0.93f, 0.9f}, 0.04f);
  const Rgb dark = jitter(rng, {0.12f, 0.12f, 0.14f}, 0.04f);

  double length = 0.0, hull_h = 0.0;
  switch (style) {
    case ShipStyle::Tanker: length = uniform(rng, 34.0, 44.0); hull_h = uniform(rng, 5.0, 6.5); break;
    case ShipStyle::ContainerShip: length = uniform(rng, 34.0, 44.0); hull_h = uniform(rng, 4.5, 6.0); break;
    case ShipStyle::Tug: length = uniform(rng, 15.0, 21.0); hull_h = uniform(rng, 4.5, 6.0); break;
    case ShipStyle::Passenger: length = uniform(rng, 32.0, 42.0); hull_h = uniform(rng, 5.0, 6.5); break;
  }
  const double lo = margin + 2.0, hi = 64.0 - margin - 2.0 - length;
  const double x0 = uniform(rng, lo, std::max(lo, hi));
  const double x1 = x0 + length;
  const double deck = water - hull_h;
  const bool stern_left = std::bernoulli_distribution(0.5)(rng);
  auto at_stern = [&](double w) { return stern_left ? x0 + 1.0 : x1 - 1.0 - w; };

  switch (style) {
    case ShipStyle::Tanker: {
      const Rgb hull = jitter(rng, {0.55f, 0.14f, 0.12f}, 0.06f);
      cv.hull(x0, x1, deck, water, 1.5, hull);
      cv.rect(x0, deck, x1, deck + 1.0, dark);
      // pipe rack along the deck
      cv.rect(x0 + 6.0, deck - 1.0, x1 - 6.0, deck - 0.5, jitter(rng, {0.6f, 0.6f, 0.55f}, 0.05f));
      const double bw = uniform(rng, 6.0, 8.0);
      const double bx = at_stern(bw);
      cv.rect(bx, deck - 7.0, bx + bw, deck, white);
      for (double wx = bx + 1.0; wx < bx + bw - 1.0; wx += 2.0) cv.rect(wx, deck - 6.0, wx + 1.0, deck - 5.0, dark);
      cv.rect(bx + bw / 2.0 - 1.0, deck - 9.5, bx + bw / 2.0 + 1.0, deck - 7.0, dark);
      break;
    }
    case ShipStyle::ContainerShip: {
      const Rgb hull = jitter(rng, {0.12f, 0.18f, 0.38f}, 0.06f);
      cv.hull(x0, x1, deck, water, 2.0, hull);
      const std::array<Rgb, 5> boxes = {{{0.8f, 0.2f, 0.15f}, {0.15f, 0.45f, 0.75f}, {0.2f, 0.6f, 0.25f},
                                         {0.9f, 0.55f, 0.1f}, {0.85f, 0.85f, 0.8f}}};
      std::uniform_int_distribution<int> pick(0, static_cast<int>(boxes.size()) - 1);
      const double bw = 5.0;
      const double bx = at_stern(bw);
      const double cx0 = stern_left ? bx + bw + 1.0 : x0 + 3.0;
      const double cx1 = stern_left ? x1 - 3.0 : bx - 1.0;
      const int tiers = std::uniform_int_distribution<int>(2, 3)(rng);
      for (int tier = 0; tier < tiers; ++tier) {
        for (double cx = cx0; cx + 3.0 <= cx1; cx += 3.0) {
          cv.rect(cx, deck - 2.0 * (tier + 1), cx + 3.0, deck - 2.0 * tier, jitter(rng, boxes[pick(rng)], 0.05f));
        }
      }
      cv.rect(bx, deck - 9.0, bx + bw, deck, white);
      cv.rect(bx + 1.0, deck - 8.0, bx + bw - 1.0, deck - 7.0, dark);
      break;
    }
    case ShipStyle::Tug: {
      const Rgb upper = dark;
      const Rgb lower = jitter(rng, {0.7f, 0.12f, 0.1f}, 0.06f);
      cv.hull(x0, x1, deck, water, 1.0, upper);
      cv.rect(x0 + 1.0, water - 2.0, x1 - 1.0, water, lower);
      const double cw = uniform(rng, 5.0, 7.0);
      const double cx = (x0 + x1) / 2.0 - cw / 2.0;
      cv.rect(cx, deck - 8.0, cx + cw, deck, white);
      cv.rect(cx, deck - 8.0, cx + cw, deck - 7.0, dark);
      for (double wx = cx + 1.0; wx < cx + cw - 1.0; wx += 2.0) cv.rect(wx, deck - 6.0, wx + 1.0, deck - 4.5, dark);
      cv.vline(cx + cw / 2.0, deck - 14.0, deck - 8.0, dark);
      cv.rect(cx + cw / 2.0 - 2.0, deck - 12.0, cx + cw / 2.0 + 2.0, deck - 11.5, dark);
      break;
    }
    case ShipStyle::Passenger: {
      cv.hull(x0, x1, deck, water, 2.0, white);
      const Rgb stripe = jitter(rng, {0.1f, 0.3f, 0.7f}, 0.08f);
      cv.rect(x0 + 1.0, water - 2.0, x1 - 1.0, water - 1.0, stripe);
      double tx0 = x0 + 3.0, tx1 = x1 - 4.0;
      for (int tier = 0; tier < 3; ++tier) {
        const double top = deck - 3.0 * (tier + 1);
        cv.rect(tx0, top, tx1, top + 3.0, white);
        for (double px = tx0 + 1.0; px < tx1 - 1.0; px += 2.0) cv.rect(px, top + 1.0, px + 1.0, top + 2.0, dark);
        tx0 += 3.0;
        tx1 -= 3.0;
      }
      for (double px = x0 + 3.0; px < x1 - 3.0; px += 2.0) cv.rect(px, deck + 1.5, px + 1.0, deck + 2.5, dark);
      const double fw = 3.0;
      const double fxx = (x0 + x1) / 2.0 - fw / 2.0;
      cv.rect(fxx, deck - 13.0, fxx + fw, deck - 9.0, stripe);
      break;
    }
  }
  return im;
}

std::string synthetic_ship_name(std::mt19937_64& rng) {
  static const std::array<const char*, 12> first = {"Nordic", "Ocean", "Sea",    "Blue",  "Atlantic", "Grand",
                                                    "Polar",  "Silver", "Royal", "Cape", "Pacific",  "Golden"};
  static const std::array<const char*, 12> second = {"Star",   "Spirit", "Voyager", "Hermes", "Aurora", "Pioneer",
                                                     "Breeze", "Queen",  "Glory",   "Trader", "Explorer", "Wind"};
  std::uniform_int_distribution<std::size_t> a(0, first.size() - 1), b(0, second.size() - 1);
  return std::string(first[a(rng)]) + " " + second[b(rng)];
}

int generate_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusSpec& spec) {
  if (spec.categories.empty() || spec.per_category < 1) throw ArgumentError("empty synthetic corpus spec");
  int written = 0;
  for (std::size_t c = 0; c < spec.categories.size(); ++c) {
    const auto dir = root / spec.categories[c];
    std::filesystem::create_directories(dir);
    for (int i = 0; i < spec.per_category; ++i) {
      char serial[16];
      std::snprintf(serial, sizeof(serial), "%04d", i);
      std::mt19937_64 rng(derive_seed(spec.seed, spec.categories[c] + "#" + serial));
      std::string name = synthetic_ship_name(rng);
      std::replace(name.begin(), name.end(), ' ', '_');
      write_png(dir / (name + "_" + serial + ".png"), render_ship(style_for_category(static_cast<int>(c)), spec.side, rng));
      ++written;
    }
  }
  return written;
}

}  // namespace shipsr
