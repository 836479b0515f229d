#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "shipsr/diffusion.hpp"

namespace shipsr {

inline constexpr std::int64_t kCheckpointVersion = 1;

// Self-describing container: version, kind, JSON config snapshot, one nested
// archive per module, optional schedule betas and an RNG state string.
struct CheckpointWriter {
  std::int64_t format_version = kCheckpointVersion;
  std::string kind;
  nlohmann::json config;
  std::map<std::string, torch::nn::Module*> modules;
  std::optional<NoiseSchedule> schedule;
  std::string rng_state;

  void save(const std::filesystem::path& path) const;
};

struct CheckpointReader {
  std::int64_t version = 0;
  std::string kind;
  nlohmann::json config;
  std::optional<NoiseSchedule> schedule;
  std::string rng_state;

  // Missing file: DependencyError. Missing version/kind or wrong kind: DataError.
  static CheckpointReader open(const std::filesystem::path& path, const std::string& expected_kind);

  // Loads the named nested archive into `module`.
  void load_module(const std::string& name, torch::nn::Module& module) const;

 private:
  std::shared_ptr<torch::serialize::InputArchive> archive_;
  std::filesystem::path path_;
};

}  // namespace shipsr
