#include "shipsr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "shipsr/errors.hpp"
#include "shipsr/tensor_image.hpp"

namespace shipsr {

namespace {
constexpr double kL1Weight = 0.1;
}  // namespace

AutoencoderReport train_autoencoder(LatentAutoencoder& ae, const torch::Tensor& images,
                                    const AutoencoderTraining& config, std::uint64_t seed,
                                    const std::function<void(int, double)>& on_epoch) {
  AutoencoderReport report;
  if (ae->config.mode == LatentMode::Identity) return report;
  const std::int64_t n = images.size(0);
  if (n == 0) throw DataError("no images for autoencoder training");
  for (auto& p : ae->parameters()) p.set_requires_grad(true);
  ae->train();
  torch::optim::Adam opt(ae->parameters(), torch::optim::AdamOptions(config.learning_rate));
  std::mt19937_64 rng(derive_seed(seed, "autoencoder"));
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const std::int64_t bs = std::max(1, config.batch_size);
  const std::int64_t steps_per_epoch = (n + bs - 1) / bs;
  const std::int64_t total = steps_per_epoch * config.epochs;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::int64_t s = 0; s < n; s += bs) {
      const std::int64_t e = std::min(n, s + bs);
      auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + s, order.begin() + e), torch::kLong);
      auto x = images.index_select(0, idx);
      const double lr = config.learning_rate * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) / total));
      for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
      opt.zero_grad();
      auto recon = (ae->decoder->forward(ae->encoder->forward(x * 2.0 - 1.0)) + 1.0) * 0.5;
      auto loss = torch::mse_loss(recon, x) + kL1Weight * torch::l1_loss(recon, x);
      loss.backward();
      opt.step();
      sum += loss.item<double>() * static_cast<double>(e - s);
      ++step;
    }
    report.epoch_loss.push_back(sum / static_cast<double>(n));
    if (on_epoch) on_epoch(epoch, report.epoch_loss.back());
  }
  ae->eval();
  ae->calibrate(images.slice(0, 0, std::min<std::int64_t>(n, 512)));
  freeze(*ae);
  report.mean_abs_error = reconstruction_error(ae, images);
  return report;
}

double reconstruction_error(LatentAutoencoder& ae, const torch::Tensor& images, std::int64_t batch_size) {
  torch::NoGradGuard no_grad;
  double sum = 0.0;
  const std::int64_t n = images.size(0);
  for (std::int64_t s = 0; s < n; s += batch_size) {
    auto x = images.slice(0, s, std::min(n, s + batch_size));
    sum += (decode_latent(encode_latent(x, ae), ae) - x).abs().sum().item<double>();
  }
  return sum / static_cast<double>(images.numel());
}

SrTrainingSet make_training_set(ShipSrModel& model, const std::vector<Image>& hr, const std::vector<Image>& reference,
                                const std::vector<int>& labels, int num_classes, std::vector<std::string> names,
                                std::vector<std::string> categories, std::int64_t batch_size) {
  const std::size_t n = hr.size();
  if (n == 0) throw DataError("empty SR training set");
  if (reference.size() != n || labels.size() != n || names.size() != n || categories.size() != n) {
    throw DataError("SR training inputs are misaligned");
  }
  std::vector<torch::Tensor> z0, zl;
  for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(n, s + static_cast<std::size_t>(batch_size));
    std::vector<const Image*> a, b;
    for (std::size_t i = s; i < e; ++i) {
      a.push_back(&hr[i]);
      b.push_back(&reference[i]);
    }
    z0.push_back(model.encode_latent(to_batch(a)));
    zl.push_back(model.encode_latent(to_batch(b)));
  }
  SrTrainingSet set;
  set.z0 = torch::cat(z0);
  set.z_lr = torch::cat(zl);
  auto lab = torch::tensor(std::vector<std::int64_t>(labels.begin(), labels.end()), torch::kLong);
  set.class_probs = torch::one_hot(lab, num_classes).to(torch::kFloat32);
  set.names = std::move(names);
  set.categories = std::move(categories);
  return set;
}

std::vector<std::int64_t> stratified_timesteps(std::int64_t n, std::int64_t T, std::mt19937_64& rng) {
  std::vector<std::int64_t> strata(static_cast<std::size_t>(n));
  std::iota(strata.begin(), strata.end(), 0);
  std::shuffle(strata.begin(), strata.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::int64_t> ts;
  ts.reserve(strata.size());
  for (auto k : strata) {
    const double v = (static_cast<double>(k) + u(rng)) * static_cast<double>(T) / static_cast<double>(n);
    ts.push_back(std::min<std::int64_t>(T - 1, static_cast<std::int64_t>(v)));
  }
  return ts;
}

std::vector<SrEpochStats> train_sr(ShipSrModel& model, const SrTrainingSet& data, const NoiseSchedule& schedule,
                                   const TrainingSection& config, std::uint64_t seed, PromptProvider& prompts,
                                   const std::function<void(const SrEpochStats&)>& on_epoch,
                                   const PromptLog& prompt_log) {
  const std::int64_t n = data.size();
  if (n == 0) throw DataError("empty SR training set");
  auto params = model.prepare_training(config.strict_paper);
  if (params.empty()) throw ConfigurationError("no trainable parameters");
  model.train();

  torch::optim::Adam opt(params, torch::optim::AdamOptions(config.learning_rate));
  std::vector<torch::Tensor> ema;
  if (config.ema_decay > 0.0) {
    for (auto& p : params) ema.push_back(p.detach().clone());
  }
  auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(seed, "sr-noise"));
  std::mt19937_64 rng(derive_seed(seed, "sr-order"));
  std::mt19937_64 prompt_rng(derive_seed(seed, "sr-prompts"));
  std::bernoulli_distribution drop(config.text_dropout);
  const auto null_text = model.denoiser->null_text;

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  const std::int64_t bs = config.batch_size;
  const std::int64_t steps_per_epoch = (n + bs - 1) / bs;
  const std::int64_t total = steps_per_epoch * config.epochs;
  std::int64_t step = 0;

  // Fixed noise, timesteps and rows for the end-of-epoch probe loss.
  const std::int64_t probe_n = std::min<std::int64_t>(n, kProbeSamples);
  auto probe_gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(seed, "sr-probe"));
  auto probe_rows = torch::randperm(n, probe_gen, torch::kLong).narrow(0, 0, probe_n);
  auto probe_t = torch::randint(schedule.steps(), {probe_n}, probe_gen, torch::kLong);
  auto probe_eps = torch::randn(data.z0.index_select(0, probe_rows).sizes(), probe_gen, data.z0.options());

  std::vector<SrEpochStats> history;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    const auto ts = stratified_timesteps(n, schedule.steps(), rng);
    double sum = 0.0, lr = config.learning_rate;
    double frozen = 0.0;
    for (std::int64_t s = 0; s < n; s += bs) {
      const std::int64_t e = std::min(n, s + bs);
      std::vector<std::int64_t> ids(order.begin() + s, order.begin() + e);
      auto idx = torch::tensor(ids, torch::kLong);
      std::vector<std::string> names, cats;
      for (auto i : ids) {
        names.push_back(data.names[static_cast<std::size_t>(i)]);
        cats.push_back(data.categories[static_cast<std::size_t>(i)]);
      }
      std::vector<std::string> rendered;
      auto text = prompts.embed_batch(names, cats, prompt_rng, &rendered);
      if (config.text_dropout > 0.0) {
        for (std::int64_t r = 0; r < text.size(0); ++r) {
          if (drop(prompt_rng)) text[r].copy_(null_text);
        }
      }
      if (prompt_log) prompt_log(epoch, step, rendered);

      DiffusionBatch batch;
      batch.z0 = data.z0.index_select(0, idx);
      batch.z_lr = data.z_lr.index_select(0, idx);
      batch.class_probs = data.class_probs.index_select(0, idx);
      batch.t = torch::tensor(std::vector<std::int64_t>(ts.begin() + s, ts.begin() + e), torch::kLong);
      batch.eps = torch::randn(batch.z0.sizes(), gen, batch.z0.options());
      batch.text = text;

      lr = config.min_learning_rate + 0.5 * (config.learning_rate - config.min_learning_rate) *
                                          (1.0 + std::cos(M_PI * static_cast<double>(step) / total));
      for (auto& g : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);
      opt.zero_grad();
      auto loss = training_loss(batch, model, schedule);
      loss.backward();
      if (config.grad_clip > 0.0) torch::nn::utils::clip_grad_norm_(params, config.grad_clip);
      opt.step();
      if (!ema.empty()) {
        torch::NoGradGuard no_grad;
        const double d = std::min(config.ema_decay, (1.0 + step) / (10.0 + step));
        for (std::size_t k = 0; k < params.size(); ++k) ema[k].mul_(d).add_(params[k].detach(), 1.0 - d);
      }
      sum += loss.item<double>() * static_cast<double>(e - s);
      ++step;
      if (e == n) frozen = model.frozen_gradient_norm(config.strict_paper);
    }
    if (frozen != 0.0) {
      throw NumericError("frozen components received gradient (norm " + std::to_string(frozen) + ")");
    }
    SrEpochStats stats;
    {
      torch::NoGradGuard no_grad;
      std::vector<torch::Tensor> live;
      for (std::size_t k = 0; k < ema.size(); ++k) {
        live.push_back(params[k].detach().clone());
        params[k].copy_(ema[k]);
      }
      model.eval();
      double probe = 0.0;
      for (std::int64_t s = 0; s < probe_n; s += bs) {
        const std::int64_t len = std::min(bs, probe_n - s);
        auto idx = probe_rows.narrow(0, s, len);
        DiffusionBatch batch;
        batch.z0 = data.z0.index_select(0, idx);
        batch.z_lr = data.z_lr.index_select(0, idx);
        batch.class_probs = data.class_probs.index_select(0, idx);
        batch.t = probe_t.narrow(0, s, len);
        batch.eps = probe_eps.narrow(0, s, len);
        batch.text = null_text.unsqueeze(0).expand({len, null_text.size(0), null_text.size(1)});
        probe += training_loss(batch, model, schedule).item<double>() * static_cast<double>(len);
      }
      for (std::size_t k = 0; k < live.size(); ++k) params[k].copy_(live[k]);
      model.train();
      stats.probe_loss = probe / static_cast<double>(probe_n);
    }
    stats.epoch = epoch;
    stats.loss = sum / static_cast<double>(n);
    stats.learning_rate = lr;
    stats.frozen_grad_norm = frozen;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    stats.prompts_rendered = prompts.prompts_rendered();
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  if (!ema.empty()) {
    torch::NoGradGuard no_grad;
    for (std::size_t k = 0; k < params.size(); ++k) params[k].copy_(ema[k]);
  }
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  model.eval();
  return history;
}

}  // namespace shipsr
