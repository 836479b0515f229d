#include "shipsr/diffusion.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <numbers>

#include "shipsr/degradation.hpp"
#include "shipsr/errors.hpp"
#include "shipsr/tensor_image.hpp"

namespace shipsr {
namespace {

torch::Tensor gather_per_sample(const std::vector<double>& table, const torch::Tensor& t,
                                const torch::Tensor& like) {
  auto values = torch::tensor(table, torch::kFloat64).index_select(0, t.to(torch::kLong).cpu());
  std::vector<std::int64_t> shape(static_cast<std::size_t>(like.dim()), 1);
  shape[0] = t.size(0);
  return values.to(like.options()).reshape(shape);
}

void check_timesteps(const torch::Tensor& t, std::int64_t T) {
  if (t.dim() != 1) throw DimensionError("timesteps must be a 1-D tensor");
  if (t.numel() == 0) return;
  const auto lo = t.min().item<std::int64_t>();
  const auto hi = t.max().item<std::int64_t>();
  if (lo < 0 || hi >= T) {
    throw IndexError("timestep out of range [0, " + std::to_string(T) + ")");
  }
}

}  // namespace

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::Linear;
  if (name == "cosine") return ScheduleKind::Cosine;
  throw ArgumentError("unknown schedule kind '" + name + "'");
}

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::Linear ? "linear" : "cosine"; }

double NoiseSchedule::alpha_bar_or_one(std::int64_t t) const {
  if (t == -1) return 1.0;
  if (t < -1 || t >= steps()) throw IndexError("timestep " + std::to_string(t) + " out of range");
  return alpha_bars[static_cast<std::size_t>(t)];
}

NoiseSchedule NoiseSchedule::from_betas(std::vector<double> betas) {
  if (betas.empty()) throw ArgumentError("schedule needs at least one timestep");
  NoiseSchedule s;
  s.betas = std::move(betas);
  double prod = 1.0;
  for (double b : s.betas) {
    if (!(b > 0.0 && b < 1.0)) throw ArgumentError("betas must lie in (0, 1)");
    prod *= 1.0 - b;
    s.alpha_bars.push_back(prod);
    s.snr.push_back(prod / (1.0 - prod));
  }
  return s;
}

NoiseSchedule NoiseSchedule::from_alpha_bars(std::vector<double> alpha_bars) {
  if (alpha_bars.empty()) throw ArgumentError("schedule needs at least one timestep");
  std::vector<double> betas;
  double prev = 1.0;
  for (double a : alpha_bars) {
    if (!(a > 0.0 && a < prev)) throw ArgumentError("alpha_bars must decrease strictly inside (0, 1)");
    betas.push_back(1.0 - a / prev);
    prev = a;
  }
  NoiseSchedule s;
  s.betas = std::move(betas);
  s.alpha_bars = std::move(alpha_bars);
  for (double a : s.alpha_bars) s.snr.push_back(a / (1.0 - a));
  return s;
}

NoiseSchedule make_schedule(ScheduleKind kind, std::int64_t T, double beta_start, double beta_end) {
  if (T < 1) throw ArgumentError("schedule needs T >= 1");
  std::vector<double> betas(static_cast<std::size_t>(T));
  if (kind == ScheduleKind::Linear) {
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
      throw ArgumentError("linear schedule needs 0 < beta_start <= beta_end < 1");
    }
    for (std::int64_t i = 0; i < T; ++i) {
      const double frac = T == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(T - 1);
      betas[static_cast<std::size_t>(i)] = beta_start + frac * (beta_end - beta_start);
    }
  } else {
    constexpr double offset = 0.008;
    auto f = [&](double i) {
      const double c = std::cos((i / static_cast<double>(T) + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
      return c * c;
    };
    const double f0 = f(0.0);
    double prev = 1.0;
    for (std::int64_t i = 0; i < T; ++i) {
      const double abar = f(static_cast<double>(i + 1)) / f0;
      betas[static_cast<std::size_t>(i)] = std::clamp(1.0 - abar / prev, 1e-8, 0.999);
      prev *= 1.0 - betas[static_cast<std::size_t>(i)];
    }
  }
  return NoiseSchedule::from_betas(std::move(betas));
}

double snr_at(const NoiseSchedule& s, std::int64_t t) {
  if (t < 0 || t >= s.steps()) throw IndexError("timestep " + std::to_string(t) + " out of range");
  return s.snr[static_cast<std::size_t>(t)];
}

torch::Tensor q_sample(const torch::Tensor& z0, const torch::Tensor& t, const torch::Tensor& eps,
                       const NoiseSchedule& s) {
  if (!z0.sizes().equals(eps.sizes())) throw DimensionError("z0 and eps shapes differ");
  if (t.dim() != 1 || t.size(0) != z0.size(0)) throw DimensionError("need one timestep per sample");
  check_timesteps(t, s.steps());
  auto abar = gather_per_sample(s.alpha_bars, t, z0);
  return abar.sqrt() * z0 + (1.0 - abar).sqrt() * eps;
}

torch::Tensor q_sample(const torch::Tensor& z0, std::int64_t t, const torch::Tensor& eps,
                       const NoiseSchedule& s) {
  if (!z0.sizes().equals(eps.sizes())) throw DimensionError("z0 and eps shapes differ");
  if (t < 0 || t >= s.steps()) throw IndexError("timestep " + std::to_string(t) + " out of range");
  const double abar = s.alpha_bars[static_cast<std::size_t>(t)];
  return std::sqrt(abar) * z0 + std::sqrt(1.0 - abar) * eps;
}

torch::Tensor training_loss(const DiffusionBatch& batch, DenoisingNetworks& nets, const NoiseSchedule& s) {
  if (!batch.z0.sizes().equals(batch.eps.sizes())) throw DimensionError("eps shape differs from z0");
  if (!batch.z0.sizes().equals(batch.z_lr.sizes())) throw DimensionError("LR latent shape differs from z0");
  if (batch.class_probs.dim() != 2 || batch.class_probs.size(0) != batch.z0.size(0)) {
    throw DimensionError("class_probs must be [B, K]");
  }
  auto z_t = q_sample(batch.z0, batch.t, batch.eps, s);
  auto b = nets.condition_vector(batch.class_probs, batch.t);
  auto cond = nets.encode_conditions(b, batch.z_lr);
  auto eps_hat = nets.predict_eps(z_t, batch.t, &cond, batch.text);
  if (!eps_hat.sizes().equals(batch.eps.sizes())) throw DimensionError("prediction shape differs from eps");
  auto loss = (batch.eps - eps_hat).pow(2).mean();
  if (!torch::isfinite(loss).item<bool>()) {
    const bool pred_finite = torch::isfinite(eps_hat).all().item<bool>();
    const bool cond_finite = torch::isfinite(b).all().item<bool>();
    throw NumericError(std::string("non-finite training loss (prediction ") +
                       (pred_finite ? "finite" : "non-finite") + ", condition vector " +
                       (cond_finite ? "finite" : "non-finite") + ")");
  }
  return loss;
}

torch::Tensor predict_z0(const torch::Tensor& z_t, const torch::Tensor& eps_hat, double alpha_bar_t) {
  return (z_t - std::sqrt(1.0 - alpha_bar_t) * eps_hat) / std::sqrt(alpha_bar_t);
}

double ddim_sigma(double alpha_bar_t, double alpha_bar_prev, double eta) {
  if (eta == 0.0) return 0.0;
  const double ratio = std::max(0.0, 1.0 - alpha_bar_t / alpha_bar_prev);
  return eta * std::sqrt((1.0 - alpha_bar_prev) / (1.0 - alpha_bar_t)) * std::sqrt(ratio);
}

torch::Tensor ddim_update(const torch::Tensor& z_t, const torch::Tensor& eps_hat, double alpha_bar_t,
                          double alpha_bar_prev, double eta, const torch::Tensor& fresh_noise) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ArgumentError("eta must lie in [0, 1]");
  if (!z_t.sizes().equals(eps_hat.sizes())) throw DimensionError("eps_hat shape differs from z_t");
  const double sigma = ddim_sigma(alpha_bar_t, alpha_bar_prev, eta);
  auto z0_hat = predict_z0(z_t, eps_hat, alpha_bar_t);
  const double dir = std::sqrt(std::max(0.0, 1.0 - alpha_bar_prev - sigma * sigma));
  auto out = std::sqrt(alpha_bar_prev) * z0_hat + dir * eps_hat;
  if (sigma > 0.0) {
    if (!fresh_noise.defined() || !fresh_noise.sizes().equals(z_t.sizes())) {
      throw ArgumentError("stochastic DDIM step needs fresh noise shaped like z_t");
    }
    out = out + sigma * fresh_noise;
  }
  return out;
}

torch::Tensor ddim_step(const torch::Tensor& z_t, const torch::Tensor& eps_hat, std::int64_t t,
                        std::int64_t t_prev, const NoiseSchedule& s, double eta,
                        std::optional<at::Generator> generator) {
  if (t_prev >= t) throw ArgumentError("ddim_step needs t_prev < t");
  const double abar_t = s.alpha_bar_or_one(t);
  const double abar_prev = s.alpha_bar_or_one(t_prev);
  torch::Tensor noise;
  if (ddim_sigma(abar_t, abar_prev, eta) > 0.0) {
    noise = generator ? torch::randn(z_t.sizes(), *generator, z_t.options())
                      : torch::randn(z_t.sizes(), z_t.options());
  }
  return ddim_update(z_t, eps_hat, abar_t, abar_prev, eta, noise);
}

std::vector<std::int64_t> sampling_timesteps(std::int64_t T, std::int64_t steps) {
  if (steps < 1) throw ArgumentError("sampler needs at least one step");
  if (steps > T) throw ArgumentError("sampler steps exceed the schedule length");
  std::vector<std::int64_t> ts;
  ts.reserve(static_cast<std::size_t>(steps));
  for (std::int64_t i = 0; i < steps; ++i) ts.push_back((steps - i) * T / steps - 1);
  return ts;
}

std::vector<Image> sample(const std::vector<Image>& lr, SuperResolutionNetworks& nets,
                          const NoiseSchedule& s, const SamplerOptions& opts, std::int64_t batch_size) {
  const auto ts = sampling_timesteps(s.steps(), opts.steps);
  if (!(opts.eta >= 0.0 && opts.eta <= 1.0)) throw ArgumentError("eta must lie in [0, 1]");
  if (lr.empty()) return {};
  const int factor = nets.scale_factor();
  torch::NoGradGuard no_grad;

  std::vector<Image> out;
  out.reserve(lr.size());
  for (std::size_t start = 0; start < lr.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(lr.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<const Image*> chunk;
    std::vector<Image> refs;
    for (std::size_t i = start; i < stop; ++i) {
      if (lr[i].height != lr[start].height || lr[i].width != lr[start].width) {
        throw DimensionError("images in one sampling batch must share a size");
      }
      chunk.push_back(&lr[i]);
      refs.push_back(bicubic_upsample(lr[i], factor));
    }
    const auto n = static_cast<std::int64_t>(chunk.size());
    auto probs = nets.class_evidence(to_batch(chunk));
    auto z_lr = nets.encode_latent(to_batch(refs));

    std::vector<at::Generator> gens;
    std::vector<torch::Tensor> init;
    for (std::int64_t i = 0; i < n; ++i) {
      gens.push_back(at::make_generator<at::CPUGeneratorImpl>(
          derive_seed(opts.seed, std::to_string(start + static_cast<std::size_t>(i)))));
      init.push_back(torch::randn(z_lr[0].sizes(), gens.back(), z_lr.options()));
    }
    // Start from the forward marginal at the first sampling step with the LR
    // latent standing in for z0; this is pure noise when alpha_bar_T is ~0.
    const double abar_start = s.alpha_bar_or_one(ts.front());
    auto z = std::sqrt(abar_start) * z_lr + std::sqrt(1.0 - abar_start) * torch::stack(init);

    for (std::size_t k = 0; k < ts.size(); ++k) {
      const std::int64_t t = ts[k];
      const std::int64_t t_prev = k + 1 < ts.size() ? ts[k + 1] : -1;
      auto t_batch = torch::full({n}, t, torch::kLong);
      auto b = nets.condition_vector(probs, t_batch);
      auto cond = nets.encode_conditions(b, z_lr);
      auto eps_hat = nets.predict_eps(z, t_batch, &cond, std::nullopt);
      const double abar_t = s.alpha_bar_or_one(t);
      const double abar_prev = s.alpha_bar_or_one(t_prev);
      torch::Tensor noise;
      if (ddim_sigma(abar_t, abar_prev, opts.eta) > 0.0) {
        std::vector<torch::Tensor> parts;
        for (auto& g : gens) parts.push_back(torch::randn(z[0].sizes(), g, z.options()));
        noise = torch::stack(parts);
      }
      z = ddim_update(z, eps_hat, abar_t, abar_prev, opts.eta, noise);
    }
    auto images = to_images(nets.decode_latent(z).clamp(0.0, 1.0));
    for (auto& im : images) out.push_back(std::move(im));
  }
  return out;
}

Image sample(const Image& lr, SuperResolutionNetworks& nets, const NoiseSchedule& s,
             const SamplerOptions& opts) {
  return sample(std::vector<Image>{lr}, nets, s, opts).front();
}

}  // namespace shipsr
