#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shipsr/classifier.hpp"
#include "shipsr/degradation.hpp"

namespace shipsr {

enum class Split { Train, Val, Test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

// hr_path points at the source image until make_pair materialises the crop;
// lr_path/ref_path stay empty until then. Paths are relative to the run
// directory once materialised.
struct ShipRecord {
  std::string id;
  std::string name;
  std::string category;
  std::string hr_path;
  std::string lr_path;
  std::string ref_path;
  Split split = Split::Train;

  bool operator==(const ShipRecord&) const = default;
};

struct CorpusMeta {
  CategoryTaxonomy taxonomy;
  int factor = 8;
  int hr_side = 64;
  std::uint64_t seed = 0;
  std::map<std::string, std::int64_t> counts;  // "total", "train", "val", "test", "skipped"
};

struct Manifest {
  std::vector<ShipRecord> records;
  CorpusMeta meta;

  std::vector<const ShipRecord*> in_split(Split split) const;
  void refresh_counts();
};

enum class NamingRule {
  FileStem,                // "hermes.png" -> "hermes"
  StemBeforeLastUnderscore // "nordic_star_0007.png" -> "nordic star"
};

NamingRule parse_naming_rule(const std::string& name);
std::string to_string(NamingRule rule);

struct SkipEntry {
  std::string path;
  std::string reason;
};

struct ManifestBuild {
  Manifest manifest;
  std::vector<SkipEntry> skipped;
};

// Scans root/<category>/ for decodable PNG files. Directories that are not in
// the taxonomy are skipped with a log entry; records come back sorted by id
// (= "<category>/<stem>").
ManifestBuild build_manifest(const std::filesystem::path& root, const CategoryTaxonomy& taxonomy,
                             NamingRule naming = NamingRule::StemBeforeLastUnderscore);

struct PairSpec {
  int hr_side = 64;
  int factor = 8;
};

// Writes hr/, lr/ and ref/ PNGs under out_dir and updates the record's paths
// (relative to out_dir). Undersized or unreadable sources are reported via
// `skip` and leave the record untouched.
std::optional<ImagePair> make_pair(ShipRecord& rec, const PairSpec& spec, const DegradationConfig& deg_cfg,
                                   const std::filesystem::path& source_root, const std::filesystem::path& out_dir,
                                   SkipEntry* skip = nullptr);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Stratified by category with largest-remainder rounding, shuffled by seed.
// With test_count, exactly that many records go to test (apportioned across
// categories) and the rest are split train/val in the fractions' ratio.
Manifest split_manifest(const Manifest& m, const SplitFractions& fractions, std::uint64_t seed,
                        std::optional<std::int64_t> test_count = std::nullopt);

// Hamilton apportionment of `total` by `weights`; ties go to the lower index.
std::vector<std::int64_t> largest_remainder(std::int64_t total, const std::vector<double>& weights);

nlohmann::json record_to_json(const ShipRecord& rec);
ShipRecord record_from_json(const nlohmann::json& j);

std::string manifest_to_jsonl(const Manifest& m);
std::vector<ShipRecord> records_from_jsonl(const std::string& text);

nlohmann::json corpus_meta_to_json(const CorpusMeta& meta);
CorpusMeta corpus_meta_from_json(const nlohmann::json& j);

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& dir);

}  // namespace shipsr
