#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shipsr/conditioning.hpp"
#include "shipsr/denoiser.hpp"
#include "shipsr/diffusion.hpp"
#include "shipsr/image.hpp"
#include "shipsr/run_config.hpp"
#include "shipsr/sr_model.hpp"

namespace shipsr::testing {

Image random_image(int height, int width, std::uint64_t seed);

// Fresh directory under the system temp dir, removed first if present.
std::filesystem::path scratch_dir(const std::string& name);

// Small networks for fast tests: 2 classes unless given, T = 50.
RunConfig tiny_config(const std::vector<std::string>& taxonomy = {"A", "B"});
ShipSrModel tiny_model(const RunConfig& config);

// Condition encoder + U-Net pair exposing the generic network interface.
struct NetPair final : DenoisingNetworks {
  NetPair(ConditioningConfig c, DenoiserConfig d) : encoder(c), denoiser(d) {}

  torch::Tensor condition_vector(const torch::Tensor& class_probs, const torch::Tensor& t) override {
    return encoder->condition_vector(class_probs, t);
  }
  MultiScaleFeatures encode_conditions(const torch::Tensor& b, const torch::Tensor& z_lr) override {
    return encoder->forward(b, z_lr);
  }
  torch::Tensor predict_eps(const torch::Tensor& z_t, const torch::Tensor& t, const MultiScaleFeatures* cond,
                            const std::optional<torch::Tensor>& text) override {
    return denoiser->forward(z_t, t, cond, text);
  }
  std::int64_t parameter_count() const;
  std::vector<torch::Tensor> parameters() const;

  ConditionEncoder encoder;
  UNetDenoiser denoiser;
};

// The real architecture shrunk below 1e3 parameters, all weights re-drawn so
// that no gradient is structurally zero, converted to float64.
NetPair gradcheck_nets(std::uint64_t seed);

struct GradCheckResult {
  std::int64_t parameters = 0;
  double max_relative_error = 0.0;
  double max_abs_gradient = 0.0;
};

// Autograd gradient of the training loss against the fourth-order central
// difference stencil.
GradCheckResult loss_gradient_check(std::uint64_t seed, double step = 1e-4);

// Writes root/<category>/<Name>_<NNNN>.png using the synthetic renderer.
void write_toy_corpus(const std::filesystem::path& root, const std::vector<std::string>& categories, int per_category,
                      int side = 72, std::uint64_t seed = 1);

std::vector<std::filesystem::path> list_files(const std::filesystem::path& root);

}  // namespace shipsr::testing
