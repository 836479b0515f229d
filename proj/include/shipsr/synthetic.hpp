#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "shipsr/image.hpp"

namespace shipsr {

// Procedural stand-in for a ship photo corpus: sky, sea and one vessel whose
// hull, superstructure and fine detail (windows, containers, portholes)
// depend on the category style.
enum class ShipStyle { Tanker, ContainerShip, Tug, Passenger };

struct SyntheticCorpusSpec {
  std::vector<std::string> categories{"Tankers", "Containerships", "Tugs", "Passenger Vessels"};
  int per_category = 500;
  int side = 72;
  std::uint64_t seed = 1;
};

ShipStyle style_for_category(int index);

Image render_ship(ShipStyle style, int side, std::mt19937_64& rng);

std::string synthetic_ship_name(std::mt19937_64& rng);

// Writes root/<category>/<Ship_Name>_<NNNN>.png; returns the number of files.
int generate_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusSpec& spec);

}  // namespace shipsr
