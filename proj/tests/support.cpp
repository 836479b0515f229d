#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "shipsr/synthetic.hpp"
#include "shipsr/text.hpp"

namespace shipsr::testing {

namespace fs = std::filesystem;

Image random_image(int height, int width, std::uint64_t seed) {
  Image im(height, width);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (auto& v : im.pixels) v = u(rng);
  return im;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "shipsr_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig tiny_config(const std::vector<std::string>& taxonomy) {
  RunConfig c;
  c.dataset.taxonomy = taxonomy;
  c.schedule.timesteps = 50;
  c.model.base_channels = 8;
  c.model.channel_mult = {1, 2};
  c.model.time_dim = 16;
  c.model.class_dim = 8;
  c.model.cond_time_dim = 8;
  c.autoencoder = {LatentMode::Learned, 4, 4, 8};
  c.autoencoder_training.epochs = 1;
  c.classifier.channels = {8, 8};
  c.classifier.embed_dim = 8;
  c.classifier.epochs = 1;
  c.training.epochs = 1;
  c.training.batch_size = 8;
  c.text.seq_len = 8;
  c.text.dim = 16;
  c.sampler.steps = 5;
  c.validate();
  return c;
}

ShipSrModel tiny_model(const RunConfig& config) {
  ShipClassifier cls(config.taxonomy().size(), config.classifier);
  return ShipSrModel::create(config, cls);
}

std::int64_t NetPair::parameter_count() const {
  return shipsr::parameter_count(*encoder) + shipsr::parameter_count(*denoiser);
}

std::vector<torch::Tensor> NetPair::parameters() const {
  auto p = encoder->parameters();
  for (auto& q : denoiser->parameters()) p.push_back(q);
  return p;
}

NetPair gradcheck_nets(std::uint64_t seed) {
  torch::manual_seed(seed);
  ConditioningConfig c;
  c.num_classes = 2;
  c.class_dim = 2;
  c.time_dim = 2;
  c.num_timesteps = 20;
  c.latent_channels = 1;
  c.scale_channels = {2};
  c.zero_init_heads = false;
  DenoiserConfig d;
  d.latent_channels = 1;
  d.base_channels = 2;
  d.channel_mult = {1};
  d.time_dim = 2;
  d.text_len = 2;
  d.text_dim = 2;
  NetPair nets(c, d);
  nets.encoder->to(torch::kFloat64);
  nets.denoiser->to(torch::kFloat64);
  torch::NoGradGuard no_grad;
  for (auto& p : nets.parameters()) p.normal_(0.0, 0.4);
  return nets;
}

GradCheckResult loss_gradient_check(std::uint64_t seed, double step) {
  auto nets = gradcheck_nets(seed);
  const auto schedule = make_schedule(ScheduleKind::Linear, 20, 1e-3, 0.2);
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed + 1);
  DiffusionBatch batch;
  batch.z0 = torch::randn({2, 1, 4, 4}, gen, opts);
  batch.z_lr = torch::randn({2, 1, 4, 4}, gen, opts);
  batch.eps = torch::randn({2, 1, 4, 4}, gen, opts);
  batch.t = torch::tensor({3, 14}, torch::kLong);
  batch.class_probs = torch::tensor({{0.25, 0.75}, {1.0, 0.0}}, opts);
  batch.text = torch::randn({2, 2, 2}, gen, opts);

  auto params = nets.parameters();
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
  training_loss(batch, nets, schedule).backward();

  GradCheckResult r;
  r.parameters = nets.parameter_count();
  torch::NoGradGuard no_grad;
  for (auto& p : params) {
    auto flat = p.view({-1});
    auto g = p.grad().view({-1});
    for (std::int64_t i = 0; i < flat.numel(); ++i) {
      const double orig = flat[i].item<double>();
      auto loss_at = [&](double offset) {
        flat[i] = orig + offset;
        return training_loss(batch, nets, schedule).item<double>();
      };
      const double numeric =
          (loss_at(-2.0 * step) - 8.0 * loss_at(-step) + 8.0 * loss_at(step) - loss_at(2.0 * step)) / (12.0 * step);
      flat[i] = orig;
      const double analytic = g[i].item<double>();
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      r.max_relative_error = std::max(r.max_relative_error, std::abs(numeric - analytic) / scale);
      r.max_abs_gradient = std::max(r.max_abs_gradient, std::abs(analytic));
    }
  }
  return r;
}

void write_toy_corpus(const fs::path& root, const std::vector<std::string>& categories, int per_category, int side,
                      std::uint64_t seed) {
  SyntheticCorpusSpec spec;
  spec.categories = categories;
  spec.per_category = per_category;
  spec.side = side;
  spec.seed = seed;
  generate_synthetic_corpus(root, spec);
}

std::vector<fs::path> list_files(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace shipsr::testing
