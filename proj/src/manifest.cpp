#include "shipsr/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "shipsr/errors.hpp"
#include "shipsr/png_io.hpp"

namespace shipsr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw DataError("unknown split '" + name + "'");
}

NamingRule parse_naming_rule(const std::string& name) {
  if (name == "file_stem") return NamingRule::FileStem;
  if (name == "stem_before_last_underscore") return NamingRule::StemBeforeLastUnderscore;
  throw ArgumentError("unknown naming rule '" + name + "'");
}

std::string to_string(NamingRule rule) {
  return rule == NamingRule::FileStem ? "file_stem" : "stem_before_last_underscore";
}

std::vector<const ShipRecord*> Manifest::in_split(Split split) const {
  std::vector<const ShipRecord*> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

void Manifest::refresh_counts() {
  const auto skipped = meta.counts.count("skipped") ? meta.counts["skipped"] : 0;
  meta.counts.clear();
  meta.counts["total"] = static_cast<std::int64_t>(records.size());
  meta.counts["train"] = 0;
  meta.counts["val"] = 0;
  meta.counts["test"] = 0;
  meta.counts["skipped"] = skipped;
  for (const auto& r : records) ++meta.counts[to_string(r.split)];
}

namespace {

std::string ship_name(const fs::path& file, NamingRule rule) {
  std::string stem = file.stem().string();
  if (rule == NamingRule::StemBeforeLastUnderscore) {
    const auto cut = stem.rfind('_');
    if (cut != std::string::npos && cut > 0) stem = stem.substr(0, cut);
    std::replace(stem.begin(), stem.end(), '_', ' ');
  }
  return stem;
}

}  // namespace

ManifestBuild build_manifest(const fs::path& root, const CategoryTaxonomy& taxonomy, NamingRule naming) {
  if (!fs::is_directory(root)) throw DataError("corpus root " + root.string() + " is not a directory");
  ManifestBuild out;
  std::vector<fs::path> files;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string category = dir.path().filename().string();
    if (!taxonomy.contains(category)) {
      out.skipped.push_back({dir.path().string(), "category not in taxonomy"});
      continue;
    }
    for (const auto& f : fs::directory_iterator(dir.path())) {
      if (f.is_regular_file()) files.push_back(f.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    try {
      const Image im = read_png(file);
      if (im.empty()) throw DataError("empty image");
    } catch (const Error& e) {
      out.skipped.push_back({file.string(), e.what()});
      continue;
    }
    ShipRecord rec;
    rec.category = file.parent_path().filename().string();
    rec.id = rec.category + "/" + file.stem().string();
    rec.name = ship_name(file, naming);
    rec.hr_path = fs::relative(file, root).generic_string();
    out.manifest.records.push_back(std::move(rec));
  }
  if (out.manifest.records.empty()) throw DataError("no readable images under " + root.string());
  std::sort(out.manifest.records.begin(), out.manifest.records.end(),
            [](const ShipRecord& a, const ShipRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.manifest.records.size(); ++i) {
    if (out.manifest.records[i].id == out.manifest.records[i - 1].id) {
      throw DataError("duplicate record id " + out.manifest.records[i].id);
    }
  }
  out.manifest.meta.taxonomy = taxonomy;
  out.manifest.meta.counts["skipped"] = static_cast<std::int64_t>(out.skipped.size());
  out.manifest.refresh_counts();
  return out;
}

std::optional<ImagePair> make_pair(ShipRecord& rec, const PairSpec& spec, const DegradationConfig& deg_cfg,
                                   const fs::path& source_root, const fs::path& out_dir, SkipEntry* skip) {
  auto report = [&](std::string reason) -> std::optional<ImagePair> {
    if (skip != nullptr) *skip = {rec.hr_path, std::move(reason)};
    return std::nullopt;
  };
  if (spec.factor != deg_cfg.downscale_factor) throw ArgumentError("pair factor differs from the degradation factor");
  if (spec.hr_side % spec.factor != 0) throw ArgumentError("hr_side must be divisible by the factor");
  Image source;
  try {
    source = read_png(source_root / rec.hr_path);
  } catch (const Error& e) {
    return report(e.what());
  }
  if (std::min(source.height, source.width) < spec.hr_side) {
    return report("source " + std::to_string(source.height) + "x" + std::to_string(source.width) +
                  " smaller than hr_side " + std::to_string(spec.hr_side));
  }
  ImagePair pair = make_image_pair(source, spec.hr_side, deg_cfg);
  const std::string file = rec.id + ".png";
  const std::string hr = "pairs/hr/" + file;
  const std::string lr = "pairs/lr/" + file;
  const std::string ref = "pairs/ref/" + file;
  write_png(out_dir / hr, pair.hr);
  write_png(out_dir / lr, pair.lr);
  write_png(out_dir / ref, pair.reference);
  rec.hr_path = hr;
  rec.lr_path = lr;
  rec.ref_path = ref;
  return pair;
}

std::vector<std::int64_t> largest_remainder(std::int64_t total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::int64_t> out(weights.size(), 0);
  if (weights.empty() || total <= 0 || sum <= 0.0) return out;
  std::vector<double> rem(weights.size());
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(total) * weights[i] / sum;
    out[i] = static_cast<std::int64_t>(std::floor(quota + 1e-9));
    rem[i] = quota - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++out[order[k]];
    ++assigned;
  }
  return out;
}

Manifest split_manifest(const Manifest& m, const SplitFractions& fr, std::uint64_t seed,
                        std::optional<std::int64_t> test_count) {
  const auto n = static_cast<std::int64_t>(m.records.size());
  if (!test_count) {
    if (fr.train < 0 || fr.val < 0 || fr.test < 0 || std::abs(fr.train + fr.val + fr.test - 1.0) > 1e-9) {
      throw ArgumentError("split fractions must be non-negative and sum to 1");
    }
  } else if (*test_count < 0 || *test_count > n) {
    throw ArgumentError("test_count " + std::to_string(*test_count) + " exceeds the " + std::to_string(n) +
                        " records");
  } else if (fr.train < 0 || fr.val < 0 || fr.train + fr.val <= 0) {
    throw ArgumentError("train/val fractions must be non-negative with a positive sum");
  }

  std::map<std::string, std::vector<std::size_t>> by_cat;
  for (std::size_t i = 0; i < m.records.size(); ++i) by_cat[m.records[i].category].push_back(i);

  std::vector<std::string> cats;
  std::vector<double> sizes;
  for (const auto& [cat, idx] : by_cat) {
    cats.push_back(cat);
    sizes.push_back(static_cast<double>(idx.size()));
  }
  std::vector<std::int64_t> test_per_cat;
  if (test_count) test_per_cat = largest_remainder(*test_count, sizes);

  Manifest out = m;
  std::mt19937_64 rng(seed);
  for (std::size_t c = 0; c < cats.size(); ++c) {
    auto idx = by_cat[cats[c]];
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto size = static_cast<std::int64_t>(idx.size());
    std::int64_t n_train = 0, n_val = 0, n_test = 0;
    if (test_count) {
      n_test = test_per_cat[c];
      const auto rest = largest_remainder(size - n_test, {fr.train, fr.val});
      n_train = rest[0];
      n_val = rest[1];
    } else {
      const auto parts = largest_remainder(size, {fr.train, fr.val, fr.test});
      n_train = parts[0];
      n_val = parts[1];
      n_test = parts[2];
    }
    for (std::int64_t k = 0; k < size; ++k) {
      const Split s = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
      out.records[idx[static_cast<std::size_t>(k)]].split = s;
    }
    (void)n_test;
  }
  out.refresh_counts();
  return out;
}

json record_to_json(const ShipRecord& rec) {
  return json{{"id", rec.id},           {"name", rec.name},         {"category", rec.category},
              {"hr_path", rec.hr_path}, {"lr_path", rec.lr_path}, {"ref_path", rec.ref_path},
              {"split", to_string(rec.split)}};
}

ShipRecord record_from_json(const json& j) {
  try {
    ShipRecord r;
    r.id = j.at("id").get<std::string>();
    r.name = j.at("name").get<std::string>();
    r.category = j.at("category").get<std::string>();
    r.hr_path = j.at("hr_path").get<std::string>();
    r.lr_path = j.at("lr_path").get<std::string>();
    r.ref_path = j.at("ref_path").get<std::string>();
    r.split = parse_split(j.at("split").get<std::string>());
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest record: ") + e.what());
  }
}

std::string manifest_to_jsonl(const Manifest& m) {
  std::vector<const ShipRecord*> sorted;
  for (const auto& r : m.records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const ShipRecord* a, const ShipRecord* b) { return a->id < b->id; });
  std::string out;
  for (const auto* r : sorted) {
    out += record_to_json(*r).dump();
    out += '\n';
  }
  return out;
}

std::vector<ShipRecord> records_from_jsonl(const std::string& text) {
  std::vector<ShipRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw DataError(std::string("malformed manifest line: ") + e.what());
    }
  }
  return out;
}

json corpus_meta_to_json(const CorpusMeta& meta) {
  return json{{"taxonomy", meta.taxonomy.names()},
              {"factor", meta.factor},
              {"hr_side", meta.hr_side},
              {"seed", meta.seed},
              {"counts", meta.counts}};
}

CorpusMeta corpus_meta_from_json(const json& j) {
  try {
    CorpusMeta meta;
    meta.taxonomy = CategoryTaxonomy(j.at("taxonomy").get<std::vector<std::string>>());
    meta.factor = j.at("factor").get<int>();
    meta.hr_side = j.value("hr_side", 64);
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.counts = j.at("counts").get<std::map<std::string, std::int64_t>>();
    return meta;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed corpus_meta.json: ") + e.what());
  }
}

void write_manifest(const fs::path& dir, const Manifest& m) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.jsonl", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write manifest.jsonl in " + dir.string());
    out << manifest_to_jsonl(m);
  }
  std::ofstream meta(dir / "corpus_meta.json", std::ios::binary | std::ios::trunc);
  if (!meta) throw DataError("cannot write corpus_meta.json in " + dir.string());
  meta << corpus_meta_to_json(m.meta).dump(2) << '\n';
}

Manifest read_manifest(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.jsonl";
  const auto meta_path = dir / "corpus_meta.json";
  if (!fs::exists(manifest_path) || !fs::exists(meta_path)) {
    throw DependencyError("no manifest in " + dir.string() + " (run dataset-build first)");
  }
  std::ifstream in(manifest_path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  Manifest m;
  m.records = records_from_jsonl(buf.str());
  std::ifstream meta_in(meta_path);
  try {
    m.meta = corpus_meta_from_json(json::parse(meta_in));
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed corpus_meta.json: ") + e.what());
  }
  return m;
}

}  // namespace shipsr
