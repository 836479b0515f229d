#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shipsr/image.hpp"

namespace shipsr {

enum class ScheduleKind { Linear, Cosine };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

// Per-timestep betas, cumulative alpha products and SNR, indexed 0..T-1.
struct NoiseSchedule {
  std::vector<double> betas;
  std::vector<double> alpha_bars;
  std::vector<double> snr;

  std::int64_t steps() const { return static_cast<std::int64_t>(betas.size()); }

  // alpha_bar at index t, with t = -1 denoting the clean endpoint (1.0).
  double alpha_bar_or_one(std::int64_t t) const;

  static NoiseSchedule from_betas(std::vector<double> betas);
  static NoiseSchedule from_alpha_bars(std::vector<double> alpha_bars);
};

NoiseSchedule make_schedule(ScheduleKind kind, std::int64_t T, double beta_start, double beta_end);

double snr_at(const NoiseSchedule& s, std::int64_t t);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps, per sample for a batch of t.
torch::Tensor q_sample(const torch::Tensor& z0, const torch::Tensor& t, const torch::Tensor& eps,
                       const NoiseSchedule& s);
torch::Tensor q_sample(const torch::Tensor& z0, std::int64_t t, const torch::Tensor& eps,
                       const NoiseSchedule& s);

// One SFT (gamma, beta) pair per denoiser scale plus the encoder feature map
// the pair was derived from.
struct SftPair {
  torch::Tensor gamma;
  torch::Tensor beta;
};

struct MultiScaleFeatures {
  std::vector<torch::Tensor> features;
  std::vector<SftPair> sft;

  std::size_t scales() const { return sft.size(); }
};

// z0 and eps share a shape; t holds one index per sample in [0, T).
// class_probs [B, K] and z_lr (LR latent, same grid as z0) feed the condition
// encoder; text is present only for training batches.
struct DiffusionBatch {
  torch::Tensor z0;
  torch::Tensor t;
  torch::Tensor eps;
  torch::Tensor class_probs;
  torch::Tensor z_lr;
  std::optional<torch::Tensor> text;
};

// Conditional noise predictor: the condition encoder and the denoiser.
class DenoisingNetworks {
 public:
  virtual ~DenoisingNetworks() = default;

  // b = concat(class embedding, time embedding), shape [B, class_dim + time_dim].
  virtual torch::Tensor condition_vector(const torch::Tensor& class_probs, const torch::Tensor& t) = 0;
  virtual MultiScaleFeatures encode_conditions(const torch::Tensor& b, const torch::Tensor& z_lr) = 0;
  virtual torch::Tensor predict_eps(const torch::Tensor& z_t, const torch::Tensor& t,
                                    const MultiScaleFeatures* cond,
                                    const std::optional<torch::Tensor>& text) = 0;
};

// The full inference bundle: classifier, frozen autoencoder and the networks above.
class SuperResolutionNetworks : public DenoisingNetworks {
 public:
  virtual int scale_factor() const = 0;
  // Softmax class evidence for a batch of LR images [B, 3, h, w] in [0,1].
  virtual torch::Tensor class_evidence(const torch::Tensor& lr) = 0;
  virtual torch::Tensor encode_latent(const torch::Tensor& x) = 0;
  virtual torch::Tensor decode_latent(const torch::Tensor& z) = 0;
};

// Mean over batch and elements of (eps - eps_hat)^2.
torch::Tensor training_loss(const DiffusionBatch& batch, DenoisingNetworks& nets, const NoiseSchedule& s);

// Predicted clean latent from a noise estimate.
torch::Tensor predict_z0(const torch::Tensor& z_t, const torch::Tensor& eps_hat, double alpha_bar_t);

// DDIM update between two cumulative alpha values. fresh_noise (shape of
// z_t) is required only when the stochastic term is non-zero.
torch::Tensor ddim_update(const torch::Tensor& z_t, const torch::Tensor& eps_hat, double alpha_bar_t,
                          double alpha_bar_prev, double eta,
                          const torch::Tensor& fresh_noise = torch::Tensor());

// Standard deviation of the DDIM stochastic term.
double ddim_sigma(double alpha_bar_t, double alpha_bar_prev, double eta);

torch::Tensor ddim_step(const torch::Tensor& z_t, const torch::Tensor& eps_hat, std::int64_t t,
                        std::int64_t t_prev, const NoiseSchedule& s, double eta,
                        std::optional<at::Generator> generator = std::nullopt);

// Descending timesteps for a sampler with the given step count ("trailing"
// spacing: always starts at T-1).
std::vector<std::int64_t> sampling_timesteps(std::int64_t T, std::int64_t steps);

struct SamplerOptions {
  std::int64_t steps = 50;
  double eta = 0.0;
  std::uint64_t seed = 0;
};

// Super-resolves each LR image. Sampling starts from q(z_t | z_lr) at the
// first sampling timestep. Image i draws its noise from a generator seeded
// with derive_seed(seed, i), so batch composition never changes its noise.
std::vector<Image> sample(const std::vector<Image>& lr, SuperResolutionNetworks& nets,
                          const NoiseSchedule& s, const SamplerOptions& opts,
                          std::int64_t batch_size = 16);
Image sample(const Image& lr, SuperResolutionNetworks& nets, const NoiseSchedule& s,
             const SamplerOptions& opts);

}  // namespace shipsr
