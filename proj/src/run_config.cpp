#include "shipsr/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "shipsr/errors.hpp"

namespace shipsr {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigurationError("config section '" + section + "' must be an object");
  std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigurationError("unknown config key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigurationError(std::string("bad value for config key '") + key + "': " + e.what());
    }
  }
}

}  // namespace

NoiseSchedule RunConfig::noise_schedule() const {
  return make_schedule(schedule.kind, schedule.timesteps, schedule.beta_start, schedule.beta_end);
}

DenoiserConfig RunConfig::denoiser_config() const {
  DenoiserConfig c;
  c.latent_channels = autoencoder.channels();
  c.base_channels = model.base_channels;
  c.channel_mult = model.channel_mult;
  c.time_dim = model.time_dim;
  c.text_len = text.seq_len;
  c.text_dim = text.dim;
  return c;
}

ConditioningConfig RunConfig::conditioning_config() const {
  ConditioningConfig c;
  c.num_classes = static_cast<int>(dataset.taxonomy.size());
  c.class_dim = model.class_dim;
  c.time_dim = model.cond_time_dim;
  c.num_timesteps = schedule.timesteps;
  c.latent_channels = autoencoder.channels();
  c.scale_channels = denoiser_config().scale_channels();
  return c;
}

void RunConfig::validate() const {
  try {
    (void)taxonomy();
    (void)prompt_set();
    (void)noise_schedule();
  } catch (const Error& e) {
    throw ConfigurationError(e.what());
  }
  if (dataset.taxonomy.empty()) throw ConfigurationError("taxonomy is empty");
  if (factor() < 1) throw ConfigurationError("degradation.factor must be >= 1");
  if (dataset.hr_side < 1 || dataset.hr_side % factor() != 0) {
    throw ConfigurationError("dataset.hr_side must be a positive multiple of the factor");
  }
  const int down = autoencoder.downsampling();
  if (down < 1 || (down & (down - 1)) != 0) throw ConfigurationError("autoencoder.down must be a power of two");
  if (dataset.hr_side % down != 0) throw ConfigurationError("dataset.hr_side must be divisible by autoencoder.down");
  const int latent_side = dataset.hr_side / down;
  const int depth = static_cast<int>(model.channel_mult.size());
  if (depth < 1) throw ConfigurationError("model.channel_mult must not be empty");
  if (latent_side % (1 << (depth - 1)) != 0) {
    throw ConfigurationError("latent side must be divisible by 2^(depth-1)");
  }
  if (model.time_dim % 2 != 0 || model.cond_time_dim % 2 != 0) throw ConfigurationError("time dims must be even");
  if (sampler.steps < 1 || sampler.steps > schedule.timesteps) throw ConfigurationError("sampler.steps must be in [1, T]");
  if (sampler.eta < 0.0 || sampler.eta > 1.0) throw ConfigurationError("sampler.eta must be in [0, 1]");
  if (training.epochs < 1 || training.batch_size < 1) throw ConfigurationError("training epochs/batch_size must be >= 1");
  if (training.text_dropout < 0.0 || training.text_dropout > 1.0) throw ConfigurationError("text_dropout must be in [0, 1]");
  if (training.ema_decay < 0.0 || training.ema_decay >= 1.0) throw ConfigurationError("ema_decay must be in [0, 1)");
  const double fsum = dataset.fractions.train + dataset.fractions.val + dataset.fractions.test;
  if (!dataset.test_count && std::abs(fsum - 1.0) > 1e-9) throw ConfigurationError("split fractions must sum to 1");
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["dataset"] = {{"taxonomy", c.dataset.taxonomy},
                  {"naming", to_string(c.dataset.naming)},
                  {"hr_side", c.dataset.hr_side},
                  {"fractions", {c.dataset.fractions.train, c.dataset.fractions.val, c.dataset.fractions.test}},
                  {"test_count", c.dataset.test_count ? json(*c.dataset.test_count) : json(nullptr)}};
  j["degradation"] = {{"kernel_sigma_min", c.degradation.kernel_sigma_min},
                      {"kernel_sigma_max", c.degradation.kernel_sigma_max},
                      {"kernel_size", c.degradation.kernel_size},
                      {"factor", c.degradation.downscale_factor},
                      {"noise_sigma", c.degradation.noise_sigma},
                      {"compression_quality", c.degradation.compression_quality
                                                  ? json(*c.degradation.compression_quality)
                                                  : json(nullptr)}};
  j["schedule"] = {{"kind", to_string(c.schedule.kind)},
                   {"timesteps", c.schedule.timesteps},
                   {"beta_start", c.schedule.beta_start},
                   {"beta_end", c.schedule.beta_end}};
  j["model"] = {{"base_channels", c.model.base_channels},
                {"channel_mult", c.model.channel_mult},
                {"time_dim", c.model.time_dim},
                {"class_dim", c.model.class_dim},
                {"cond_time_dim", c.model.cond_time_dim}};
  j["autoencoder"] = {{"mode", to_string(c.autoencoder.mode)},
                      {"latent_channels", c.autoencoder.latent_channels},
                      {"down", c.autoencoder.down},
                      {"hidden", c.autoencoder.hidden},
                      {"epochs", c.autoencoder_training.epochs},
                      {"batch_size", c.autoencoder_training.batch_size},
                      {"learning_rate", c.autoencoder_training.learning_rate}};
  j["classifier"] = {{"input_side", c.classifier.input_side},
                     {"channels", c.classifier.channels},
                     {"embed_dim", c.classifier.embed_dim},
                     {"epochs", c.classifier.epochs},
                     {"batch_size", c.classifier.batch_size},
                     {"learning_rate", c.classifier.learning_rate},
                     {"val_fraction", c.classifier.val_fraction},
                     {"finetune_on_degraded", c.classifier.finetune_on_degraded},
                     {"finetune_epochs", c.classifier.finetune_epochs}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"batch_size", c.training.batch_size},
                   {"learning_rate", c.training.learning_rate},
                   {"min_learning_rate", c.training.min_learning_rate},
                   {"grad_clip", c.training.grad_clip},
                   {"ema_decay", c.training.ema_decay},
                   {"text_dropout", c.training.text_dropout},
                   {"strict_paper", c.training.strict_paper},
                   {"log_prompts", c.training.log_prompts}};
  j["prompts"] = c.prompts;
  j["text"] = {{"seq_len", c.text.seq_len}, {"dim", c.text.dim}, {"vocab", c.text.vocab}, {"seed", c.text.seed}};
  j["sampler"] = {{"steps", c.sampler.steps}, {"eta", c.sampler.eta}};
  j["eval"] = {{"grid_rows", c.eval.grid_rows}, {"batch_size", c.eval.batch_size}, {"max_images", c.eval.max_images}};
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  check_keys(j, "", {"seed", "dataset", "degradation", "schedule", "model", "autoencoder", "classifier", "training",
                     "prompts", "text", "sampler", "eval"});
  read(j, "seed", c.seed);
  read(j, "prompts", c.prompts);
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    check_keys(d, "dataset", {"taxonomy", "naming", "hr_side", "fractions", "test_count"});
    read(d, "taxonomy", c.dataset.taxonomy);
    if (d.contains("naming")) c.dataset.naming = parse_naming_rule(d["naming"].get<std::string>());
    read(d, "hr_side", c.dataset.hr_side);
    if (d.contains("fractions")) {
      const auto f = d["fractions"].get<std::vector<double>>();
      if (f.size() != 3) throw ConfigurationError("dataset.fractions needs three entries");
      c.dataset.fractions = {f[0], f[1], f[2]};
    }
    if (d.contains("test_count") && !d["test_count"].is_null()) c.dataset.test_count = d["test_count"].get<std::int64_t>();
  }
  if (j.contains("degradation")) {
    const auto& d = j["degradation"];
    check_keys(d, "degradation",
               {"kernel_sigma_min", "kernel_sigma_max", "kernel_size", "factor", "noise_sigma", "compression_quality"});
    read(d, "kernel_sigma_min", c.degradation.kernel_sigma_min);
    read(d, "kernel_sigma_max", c.degradation.kernel_sigma_max);
    read(d, "kernel_size", c.degradation.kernel_size);
    read(d, "factor", c.degradation.downscale_factor);
    read(d, "noise_sigma", c.degradation.noise_sigma);
    if (d.contains("compression_quality") && !d["compression_quality"].is_null()) {
      c.degradation.compression_quality = d["compression_quality"].get<int>();
    }
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    check_keys(s, "schedule", {"kind", "timesteps", "beta_start", "beta_end"});
    if (s.contains("kind")) c.schedule.kind = parse_schedule_kind(s["kind"].get<std::string>());
    read(s, "timesteps", c.schedule.timesteps);
    read(s, "beta_start", c.schedule.beta_start);
    read(s, "beta_end", c.schedule.beta_end);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, "model", {"base_channels", "channel_mult", "time_dim", "class_dim", "cond_time_dim"});
    read(m, "base_channels", c.model.base_channels);
    read(m, "channel_mult", c.model.channel_mult);
    read(m, "time_dim", c.model.time_dim);
    read(m, "class_dim", c.model.class_dim);
    read(m, "cond_time_dim", c.model.cond_time_dim);
  }
  if (j.contains("autoencoder")) {
    const auto& a = j["autoencoder"];
    check_keys(a, "autoencoder", {"mode", "latent_channels", "down", "hidden", "epochs", "batch_size", "learning_rate"});
    if (a.contains("mode")) c.autoencoder.mode = parse_latent_mode(a["mode"].get<std::string>());
    read(a, "latent_channels", c.autoencoder.latent_channels);
    read(a, "down", c.autoencoder.down);
    read(a, "hidden", c.autoencoder.hidden);
    read(a, "epochs", c.autoencoder_training.epochs);
    read(a, "batch_size", c.autoencoder_training.batch_size);
    read(a, "learning_rate", c.autoencoder_training.learning_rate);
  }
  if (j.contains("classifier")) {
    const auto& k = j["classifier"];
    check_keys(k, "classifier", {"input_side", "channels", "embed_dim", "epochs", "batch_size", "learning_rate",
                                 "val_fraction", "finetune_on_degraded", "finetune_epochs"});
    read(k, "input_side", c.classifier.input_side);
    read(k, "channels", c.classifier.channels);
    read(k, "embed_dim", c.classifier.embed_dim);
    read(k, "epochs", c.classifier.epochs);
    read(k, "batch_size", c.classifier.batch_size);
    read(k, "learning_rate", c.classifier.learning_rate);
    read(k, "val_fraction", c.classifier.val_fraction);
    read(k, "finetune_on_degraded", c.classifier.finetune_on_degraded);
    read(k, "finetune_epochs", c.classifier.finetune_epochs);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    check_keys(t, "training", {"epochs", "batch_size", "learning_rate", "min_learning_rate", "grad_clip", "ema_decay",
                               "text_dropout", "strict_paper", "log_prompts"});
    read(t, "epochs", c.training.epochs);
    read(t, "batch_size", c.training.batch_size);
    read(t, "learning_rate", c.training.learning_rate);
    read(t, "min_learning_rate", c.training.min_learning_rate);
    read(t, "grad_clip", c.training.grad_clip);
    read(t, "ema_decay", c.training.ema_decay);
    read(t, "text_dropout", c.training.text_dropout);
    read(t, "strict_paper", c.training.strict_paper);
    read(t, "log_prompts", c.training.log_prompts);
  }
  if (j.contains("text")) {
    const auto& t = j["text"];
    check_keys(t, "text", {"seq_len", "dim", "vocab", "seed"});
    read(t, "seq_len", c.text.seq_len);
    read(t, "dim", c.text.dim);
    read(t, "vocab", c.text.vocab);
    read(t, "seed", c.text.seed);
  }
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    check_keys(s, "sampler", {"steps", "eta"});
    read(s, "steps", c.sampler.steps);
    read(s, "eta", c.sampler.eta);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, "eval", {"grid_rows", "batch_size", "max_images"});
    read(e, "grid_rows", c.eval.grid_rows);
    read(e, "batch_size", c.eval.batch_size);
    read(e, "max_images", c.eval.max_images);
  }
  c.classifier.seed = c.seed;
  c.classifier.degraded_factor = c.degradation.downscale_factor;
  c.sampler.seed = c.seed;
  c.validate();
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(config).dump())));
  return buf;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DependencyError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigurationError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write config " + path.string());
  out << to_json(config).dump(2) << "\n";
}

}  // namespace shipsr
