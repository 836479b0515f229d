#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shipsr/autoencoder.hpp"
#include "shipsr/classifier.hpp"
#include "shipsr/conditioning.hpp"
#include "shipsr/degradation.hpp"
#include "shipsr/denoiser.hpp"
#include "shipsr/diffusion.hpp"
#include "shipsr/manifest.hpp"
#include "shipsr/text.hpp"

namespace shipsr {

struct DatasetSection {
  std::vector<std::string> taxonomy = CategoryTaxonomy::ship_spotting().names();
  NamingRule naming = NamingRule::StemBeforeLastUnderscore;
  int hr_side = 64;
  SplitFractions fractions;
  std::optional<std::int64_t> test_count;
};

struct ScheduleSection {
  ScheduleKind kind = ScheduleKind::Linear;
  std::int64_t timesteps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;
};

struct ModelSection {
  int base_channels = 32;
  std::vector<int> channel_mult{1, 2, 2};
  int time_dim = 64;
  int class_dim = 64;
  int cond_time_dim = 64;
};

struct AutoencoderTraining {
  int epochs = 25;
  int batch_size = 32;
  double learning_rate = 2e-3;
};

struct TrainingSection {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double min_learning_rate = 5e-5;
  double grad_clip = 1.0;
  double ema_decay = 0.995;
  // Probability of replacing a sample's text embedding by the null embedding.
  double text_dropout = 0.0;
  bool strict_paper = false;
  bool log_prompts = true;
};

struct EvalSection {
  int grid_rows = 4;
  int batch_size = 16;
  std::int64_t max_images = 0;  // 0: whole test split
};

struct RunConfig {
  std::uint64_t seed = 7;
  DatasetSection dataset;
  DegradationSettings degradation;
  ScheduleSection schedule;
  ModelSection model;
  AutoencoderConfig autoencoder{LatentMode::Learned, 8, 4, 64};
  AutoencoderTraining autoencoder_training;
  ClassifierConfig classifier;
  TrainingSection training;
  std::vector<std::string> prompts = PromptSet::defaults().patterns();
  HashTextEncoderConfig text;
  SamplerOptions sampler{.steps = 10};
  EvalSection eval;

  int factor() const { return degradation.downscale_factor; }
  CategoryTaxonomy taxonomy() const { return CategoryTaxonomy(dataset.taxonomy); }
  PromptSet prompt_set() const { return PromptSet(prompts); }
  NoiseSchedule noise_schedule() const;
  DenoiserConfig denoiser_config() const;
  ConditioningConfig conditioning_config() const;

  // Throws ConfigurationError on inconsistent settings.
  void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are a ConfigurationError.
RunConfig run_config_from_json(const nlohmann::json& j);

// FNV-1a 64 over the canonical (sorted-key, compact) serialization, as hex.
std::string fingerprint(const RunConfig& config);
std::uint64_t fnv1a64(std::string_view bytes);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace shipsr
