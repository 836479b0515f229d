#include "shipsr/sr_model.hpp"

#include "shipsr/errors.hpp"

namespace shipsr {

ShipSrModel::ShipSrModel(LatentAutoencoder ae_, ConditionEncoder encoder_, UNetDenoiser denoiser_,
                         ShipClassifier classifier_, int factor)
    : ae(std::move(ae_)),
      encoder(std::move(encoder_)),
      denoiser(std::move(denoiser_)),
      classifier(std::move(classifier_)),
      factor_(factor) {
  if (encoder->config.scale_channels != denoiser->config.scale_channels()) {
    throw ConfigurationError("condition encoder scales do not match the denoiser");
  }
  if (classifier->num_classes != encoder->config.num_classes) {
    throw ConfigurationError("classifier output count differs from the class table size");
  }
  freeze(*ae);
  freeze(*classifier);
  ae->eval();
  classifier->eval();
}

ShipSrModel ShipSrModel::create(const RunConfig& config, ShipClassifier classifier) {
  return ShipSrModel(LatentAutoencoder(config.autoencoder), ConditionEncoder(config.conditioning_config()),
                     UNetDenoiser(config.denoiser_config()), std::move(classifier), config.factor());
}

torch::Tensor ShipSrModel::class_evidence(const torch::Tensor& lr) {
  torch::NoGradGuard no_grad;
  return classifier->probabilities(lr);
}

torch::Tensor ShipSrModel::encode_latent(const torch::Tensor& x) {
  const int depth = denoiser->config.depth();
  const int unit = ae->config.downsampling() * (1 << (depth - 1));
  if (x.dim() != 4 || x.size(2) % unit != 0 || x.size(3) % unit != 0) {
    throw DimensionError("image side must be a multiple of " + std::to_string(unit) + " for this model");
  }
  return shipsr::encode_latent(x, ae);
}

torch::Tensor ShipSrModel::decode_latent(const torch::Tensor& z) { return shipsr::decode_latent(z, ae); }

torch::Tensor ShipSrModel::condition_vector(const torch::Tensor& class_probs, const torch::Tensor& t) {
  return encoder->condition_vector(class_probs, t);
}

MultiScaleFeatures ShipSrModel::encode_conditions(const torch::Tensor& b, const torch::Tensor& z_lr) {
  return encoder->forward(b, z_lr);
}

torch::Tensor ShipSrModel::predict_eps(const torch::Tensor& z_t, const torch::Tensor& t, const MultiScaleFeatures* cond,
                                       const std::optional<torch::Tensor>& text) {
  return shipsr::predict_eps(z_t, t, cond, text, denoiser);
}

std::vector<torch::Tensor> ShipSrModel::prepare_training(bool strict_paper) {
  freeze(*ae);
  freeze(*classifier);
  if (strict_paper) freeze(*denoiser);
  std::vector<torch::Tensor> params;
  for (auto& p : encoder->parameters()) {
    p.set_requires_grad(true);
    params.push_back(p);
  }
  if (!strict_paper) {
    for (auto& p : denoiser->parameters()) {
      p.set_requires_grad(true);
      params.push_back(p);
    }
  }
  return params;
}

double ShipSrModel::frozen_gradient_norm(bool strict_paper) const {
  double total = gradient_norm(*ae) + gradient_norm(*classifier);
  if (strict_paper) total += gradient_norm(*denoiser);
  return total;
}

void ShipSrModel::train(bool on) {
  encoder->train(on);
  denoiser->train(on);
  ae->eval();
  classifier->eval();
}

void save_sr_checkpoint(const std::filesystem::path& path, ShipSrModel& model, const RunConfig& config,
                        const NoiseSchedule& schedule, const std::string& rng_state) {
  CheckpointWriter w;
  w.kind = "sr";
  w.config = to_json(config);
  w.modules = {{"autoencoder", model.ae.ptr().get()},
               {"encoder", model.encoder.ptr().get()},
               {"denoiser", model.denoiser.ptr().get()},
               {"classifier", model.classifier.ptr().get()}};
  w.schedule = schedule;
  w.rng_state = rng_state;
  w.save(path);
}

ShipSrModel load_sr_checkpoint(const std::filesystem::path& path, RunConfig* config, NoiseSchedule* schedule) {
  auto r = CheckpointReader::open(path, "sr");
  RunConfig cfg = run_config_from_json(r.config);
  ClassifierConfig ccfg = cfg.classifier;
  ShipClassifier cls(cfg.taxonomy().size(), ccfg);
  ShipSrModel model(LatentAutoencoder(cfg.autoencoder), ConditionEncoder(cfg.conditioning_config()),
                    UNetDenoiser(cfg.denoiser_config()), cls, cfg.factor());
  r.load_module("autoencoder", *model.ae);
  r.load_module("encoder", *model.encoder);
  r.load_module("denoiser", *model.denoiser);
  r.load_module("classifier", *model.classifier);
  freeze(*model.ae);
  freeze(*model.classifier);
  model.eval();
  if (config) *config = cfg;
  if (schedule) *schedule = r.schedule ? *r.schedule : cfg.noise_schedule();
  return model;
}

void save_classifier_checkpoint(const std::filesystem::path& path, ShipClassifier& model,
                                const CategoryTaxonomy& taxonomy, const ClassifierConfig& config,
                                double val_accuracy) {
  CheckpointWriter w;
  w.kind = "classifier";
  w.config = {{"taxonomy", taxonomy.names()},
              {"input_side", config.input_side},
              {"channels", config.channels},
              {"embed_dim", config.embed_dim},
              {"val_accuracy", val_accuracy}};
  w.modules = {{"classifier", model.ptr().get()}};
  w.save(path);
}

ShipClassifier load_classifier_checkpoint(const std::filesystem::path& path, CategoryTaxonomy* taxonomy) {
  auto r = CheckpointReader::open(path, "classifier");
  ClassifierConfig cfg;
  CategoryTaxonomy tax;
  try {
    tax = CategoryTaxonomy(r.config.at("taxonomy").get<std::vector<std::string>>());
    cfg.input_side = r.config.at("input_side").get<int>();
    cfg.channels = r.config.at("channels").get<std::vector<int>>();
    cfg.embed_dim = r.config.at("embed_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("classifier checkpoint config incomplete: ") + e.what());
  }
  ShipClassifier model(tax.size(), cfg);
  r.load_module("classifier", *model);
  freeze(*model);
  model->eval();
  if (taxonomy) *taxonomy = tax;
  return model;
}

}  // namespace shipsr
