#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <vector>

#include "shipsr/autoencoder.hpp"
#include "shipsr/checkpoint.hpp"
#include "shipsr/classifier.hpp"
#include "shipsr/conditioning.hpp"
#include "shipsr/denoiser.hpp"
#include "shipsr/diffusion.hpp"
#include "shipsr/run_config.hpp"

namespace shipsr {

// Inference/training bundle: frozen autoencoder and classifier, the
// class- and time-aware condition encoder and the denoiser.
class ShipSrModel final : public SuperResolutionNetworks {
 public:
  ShipSrModel(LatentAutoencoder ae, ConditionEncoder encoder, UNetDenoiser denoiser, ShipClassifier classifier,
              int factor);

  // Fresh networks for `config`; the classifier is supplied already trained.
  static ShipSrModel create(const RunConfig& config, ShipClassifier classifier);

  int scale_factor() const override { return factor_; }
  torch::Tensor class_evidence(const torch::Tensor& lr) override;
  torch::Tensor encode_latent(const torch::Tensor& x) override;
  torch::Tensor decode_latent(const torch::Tensor& z) override;
  torch::Tensor condition_vector(const torch::Tensor& class_probs, const torch::Tensor& t) override;
  MultiScaleFeatures encode_conditions(const torch::Tensor& b, const torch::Tensor& z_lr) override;
  torch::Tensor predict_eps(const torch::Tensor& z_t, const torch::Tensor& t, const MultiScaleFeatures* cond,
                            const std::optional<torch::Tensor>& text) override;

  // Freezes the autoencoder and classifier, and the denoiser in strict mode.
  // Returns the parameters the optimizer may update.
  std::vector<torch::Tensor> prepare_training(bool strict_paper);

  // Sum of gradient norms over every component that must stay frozen.
  double frozen_gradient_norm(bool strict_paper) const;

  void train(bool on = true);
  void eval() { train(false); }

  LatentAutoencoder ae;
  ConditionEncoder encoder;
  UNetDenoiser denoiser;
  ShipClassifier classifier;

 private:
  int factor_;
};

void save_sr_checkpoint(const std::filesystem::path& path, ShipSrModel& model, const RunConfig& config,
                        const NoiseSchedule& schedule, const std::string& rng_state = "");
// Rebuilds the model from the checkpoint's own config snapshot.
ShipSrModel load_sr_checkpoint(const std::filesystem::path& path, RunConfig* config = nullptr,
                               NoiseSchedule* schedule = nullptr);

void save_classifier_checkpoint(const std::filesystem::path& path, ShipClassifier& model,
                                const CategoryTaxonomy& taxonomy, const ClassifierConfig& config,
                                double val_accuracy);
ShipClassifier load_classifier_checkpoint(const std::filesystem::path& path, CategoryTaxonomy* taxonomy = nullptr);

}  // namespace shipsr
