#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "shipsr/run_config.hpp"
#include "shipsr/sr_model.hpp"
#include "shipsr/text.hpp"

namespace shipsr {

struct AutoencoderReport {
  std::vector<double> epoch_loss;
  double mean_abs_error = 0.0;  // |D(E(x)) - x| after training, on the training images
};

// Reconstruction training (MSE plus a small L1 term) of a learned autoencoder
// followed by latent calibration and freezing. Identity mode returns immediately.
AutoencoderReport train_autoencoder(LatentAutoencoder& ae, const torch::Tensor& images,
                                    const AutoencoderTraining& config, std::uint64_t seed,
                                    const std::function<void(int, double)>& on_epoch = {});

double reconstruction_error(LatentAutoencoder& ae, const torch::Tensor& images, std::int64_t batch_size = 64);

// Latents of the HR targets and of the bicubic references, with one-hot class
// rows and the metadata the prompts are rendered from.
struct SrTrainingSet {
  torch::Tensor z0;
  torch::Tensor z_lr;
  torch::Tensor class_probs;
  std::vector<std::string> names;
  std::vector<std::string> categories;

  std::int64_t size() const { return z0.size(0); }
};

SrTrainingSet make_training_set(ShipSrModel& model, const std::vector<Image>& hr, const std::vector<Image>& reference,
                                const std::vector<int>& labels, int num_classes, std::vector<std::string> names,
                                std::vector<std::string> categories, std::int64_t batch_size = 64);

struct SrEpochStats {
  int epoch = 0;
  double loss = 0.0;
  // Loss of the (EMA) weights at the end of the epoch on a fixed subset of the
  // training set with fixed noise and timesteps.
  double probe_loss = 0.0;
  double learning_rate = 0.0;
  double frozen_grad_norm = 0.0;
  double seconds = 0.0;
  std::int64_t prompts_rendered = 0;
};

inline constexpr std::int64_t kProbeSamples = 512;

using PromptLog = std::function<void(int epoch, std::int64_t step, const std::vector<std::string>& prompts)>;

// Minimises the noise-prediction objective over the trainable parameters.
// Timesteps are stratified over each epoch (every t still uniform on [0, T)).
// Every epoch the frozen components' gradient norm is checked to be exactly
// zero, and the probe loss is measured. EMA weights replace the live weights at the end when ema_decay > 0.
std::vector<SrEpochStats> train_sr(ShipSrModel& model, const SrTrainingSet& data, const NoiseSchedule& schedule,
                                   const TrainingSection& config, std::uint64_t seed, PromptProvider& prompts,
                                   const std::function<void(const SrEpochStats&)>& on_epoch = {},
                                   const PromptLog& prompt_log = {});

// Marginally uniform timesteps in [0, T), one per stratum of an epoch of n samples.
std::vector<std::int64_t> stratified_timesteps(std::int64_t n, std::int64_t T, std::mt19937_64& rng);

}  // namespace shipsr
