#include "shipsr/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "shipsr/errors.hpp"
#include "shipsr/png_io.hpp"
#include "shipsr/sr_model.hpp"
#include "shipsr/tensor_image.hpp"
#include "shipsr/training.hpp"

namespace shipsr {

namespace fs = std::filesystem;
using nlohmann::json;

StageLog::StageLog(const fs::path& path, std::string stage) : path_(path), stage_(std::move(stage)) {
  fs::create_directories(path_.parent_path());
}

void StageLog::write(const std::string& event, json fields) {
  fields["stage"] = stage_;
  fields["event"] = event;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error("cannot append to log " + path_.string());
  out << fields.dump() << "\n";
}

namespace {

void check_device(const std::string& device) {
  if (device != "cpu") throw DependencyError("device '" + device + "' is not available in this build");
}

void require(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) throw DependencyError("missing " + path.string() + " (run " + hint + " first)");
}

struct SplitData {
  std::vector<const ShipRecord*> records;
  std::vector<Image> hr, lr, ref;
  std::vector<int> labels;
};

SplitData load_split(const Manifest& m, Split split, const fs::path& run_dir, bool hr, bool lr, bool ref,
                     std::int64_t limit = 0) {
  SplitData d;
  const auto tax = m.meta.taxonomy;
  for (const auto* rec : m.in_split(split)) {
    if (limit > 0 && static_cast<std::int64_t>(d.records.size()) >= limit) break;
    const int label = tax.index_of(rec->category);
    if (label < 0) throw DataError("record " + rec->id + " has a category outside the taxonomy");
    d.records.push_back(rec);
    d.labels.push_back(label);
    if (hr) d.hr.push_back(read_png(run_dir / rec->hr_path));
    if (lr) d.lr.push_back(read_png(run_dir / rec->lr_path));
    if (ref) d.ref.push_back(read_png(run_dir / rec->ref_path));
  }
  if (d.records.empty()) throw DataError("split '" + to_string(split) + "' is empty");
  return d;
}

SamplerOptions sampler_options(const RunConfig& cfg, const StageOptions& o) {
  SamplerOptions s = cfg.sampler;
  s.seed = o.seed.value_or(cfg.seed);
  if (o.steps) s.steps = *o.steps;
  if (o.eta) s.eta = *o.eta;
  if (s.steps < 1) throw ArgumentError("--steps must be >= 1");
  if (s.eta < 0.0 || s.eta > 1.0) throw ArgumentError("--eta must lie in [0, 1]");
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string safe_file(const std::string& id) {
  std::string s = id;
  for (auto& ch : s) {
    if (ch == '/' || ch == ' ') ch = '_';
  }
  return s;
}

}  // namespace

RunConfig resolve_config(const StageOptions& o, bool persist, bool builds_dataset) {
  if (o.run_dir.empty()) throw ArgumentError("--run-dir is required");
  check_device(o.device);
  const RunPaths paths{o.run_dir};
  RunConfig cfg;
  if (o.config_path) {
    cfg = load_run_config(*o.config_path);
  } else if (fs::exists(paths.config())) {
    cfg = load_run_config(paths.config());
  }
  if (o.factor && *o.factor != cfg.factor()) {
    if (!builds_dataset) {
      throw ConfigurationError("--factor " + std::to_string(*o.factor) + " differs from the run's factor " +
                               std::to_string(cfg.factor()));
    }
    cfg.degradation.downscale_factor = *o.factor;
  }
  if (persist) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.strict_paper) cfg.training.strict_paper = true;
  }
  cfg.classifier.seed = cfg.seed;
  cfg.classifier.degraded_factor = cfg.factor();
  cfg.sampler.seed = cfg.seed;
  cfg.validate();
  if (persist || !fs::exists(paths.config())) save_run_config(paths.config(), cfg);
  return cfg;
}

void run_dataset_build(const StageOptions& o, std::ostream& out) {
  if (!o.root) throw ArgumentError("dataset-build needs --root");
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = resolve_config(o, true, true);
  const RunPaths paths{o.run_dir};
  StageLog log(paths.log("dataset-build"), "dataset-build");
  log.write("start", {{"config_fingerprint", fingerprint(cfg)}, {"root", o.root->string()}});

  auto built = build_manifest(*o.root, cfg.taxonomy(), cfg.dataset.naming);
  for (const auto& s : built.skipped) log.write("skip", {{"path", s.path}, {"reason", s.reason}});
  std::int64_t skipped = static_cast<std::int64_t>(built.skipped.size());

  Manifest m;
  m.meta.taxonomy = cfg.taxonomy();
  m.meta.factor = cfg.factor();
  m.meta.hr_side = cfg.dataset.hr_side;
  m.meta.seed = cfg.seed;
  const PairSpec spec{cfg.dataset.hr_side, cfg.factor()};
  for (auto rec : built.manifest.records) {
    SkipEntry skip;
    const auto deg = cfg.degradation.for_record(cfg.seed, rec.id);
    if (make_pair(rec, spec, deg, *o.root, o.run_dir, &skip)) {
      m.records.push_back(std::move(rec));
    } else {
      log.write("skip", {{"path", skip.path}, {"reason", skip.reason}});
      ++skipped;
    }
  }
  if (m.records.empty()) throw DataError("no usable images under " + o.root->string());
  m = split_manifest(m, cfg.dataset.fractions, cfg.seed, cfg.dataset.test_count);
  m.meta.counts["skipped"] = skipped;
  write_manifest(o.run_dir, m);
  log.write("done", {{"counts", m.meta.counts}, {"seconds", seconds_since(t0)}});
  out << "dataset-build: " << m.meta.counts["total"] << " records (train " << m.meta.counts["train"] << ", val "
      << m.meta.counts["val"] << ", test " << m.meta.counts["test"] << "), " << skipped << " skipped\n";
}

void run_train_classifier(const StageOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = resolve_config(o, true, false);
  const RunPaths paths{o.run_dir};
  const Manifest m = read_manifest(o.run_dir);
  StageLog log(paths.log("train-classifier"), "train-classifier");
  log.write("start", {{"config_fingerprint", fingerprint(cfg)}});

  auto data = load_split(m, Split::Train, o.run_dir, true, false, false);
  torch::manual_seed(derive_seed(cfg.seed, "classifier-init"));
  auto trained = train_classifier(LabeledImages{std::move(data.hr), data.labels}, m.meta.taxonomy, cfg.classifier);
  for (const auto& e : trained.history) {
    log.write("epoch", {{"epoch", e.epoch}, {"loss", e.loss}, {"val_accuracy", e.val_accuracy}});
  }
  save_classifier_checkpoint(paths.classifier(), trained.model, m.meta.taxonomy, cfg.classifier, trained.val_accuracy);
  log.write("done", {{"val_accuracy", trained.val_accuracy}, {"seconds", seconds_since(t0)}});
  out << "train-classifier: validation accuracy " << std::fixed << std::setprecision(4) << trained.val_accuracy
      << "\n";
}

void run_train_sr(const StageOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = resolve_config(o, true, false);
  const RunPaths paths{o.run_dir};
  const Manifest m = read_manifest(o.run_dir);
  require(paths.classifier(), "train-classifier");
  CategoryTaxonomy tax;
  auto classifier = load_classifier_checkpoint(paths.classifier(), &tax);
  if (!(tax == m.meta.taxonomy)) throw DataError("classifier taxonomy differs from the manifest");
  StageLog log(paths.log("train-sr"), "train-sr");
  log.write("start", {{"config_fingerprint", fingerprint(cfg)}, {"strict_paper", cfg.training.strict_paper}});

  auto data = load_split(m, Split::Train, o.run_dir, true, false, true);
  torch::manual_seed(derive_seed(cfg.seed, "sr-init"));
  ShipSrModel model = ShipSrModel::create(cfg, classifier);
  if (o.init) {
    auto r = CheckpointReader::open(*o.init, "sr");
    r.load_module("autoencoder", *model.ae);
    r.load_module("encoder", *model.encoder);
    r.load_module("denoiser", *model.denoiser);
    freeze(*model.ae);
    log.write("init", {{"from", o.init->string()}});
  } else {
    auto images = to_batch(data.hr);
    auto ae_report = train_autoencoder(model.ae, images, cfg.autoencoder_training, cfg.seed, [&](int epoch, double loss) {
      log.write("autoencoder_epoch", {{"epoch", epoch}, {"l1", loss}});
    });
    log.write("autoencoder_done", {{"mean_abs_error", ae_report.mean_abs_error}});
    if (cfg.training.strict_paper) log.write("warning", {{"message", "strict mode without --init keeps a random denoiser"}});
  }

  std::vector<std::string> names, cats;
  for (const auto* rec : data.records) {
    names.push_back(rec->name);
    cats.push_back(rec->category);
  }
  auto set = make_training_set(model, data.hr, data.ref, data.labels, tax.size(), names, cats);
  data.hr.clear();
  data.ref.clear();

  const auto schedule = cfg.noise_schedule();
  const PromptSet prompts = cfg.prompt_set();
  HashTextEncoder text_encoder(cfg.text);
  auto provider = text_gate(Phase::Train, prompts, text_encoder);

  std::ofstream prompt_file;
  if (cfg.training.log_prompts) {
    fs::create_directories(paths.prompts().parent_path());
    prompt_file.open(paths.prompts(), std::ios::app);
  }
  PromptLog prompt_log;
  if (cfg.training.log_prompts) {
    prompt_log = [&](int epoch, std::int64_t step, const std::vector<std::string>& rendered) {
      prompt_file << json{{"epoch", epoch}, {"step", step}, {"prompts", rendered}}.dump() << "\n";
    };
  }
  log.write("model", {{"trainable_parameters", parameter_count(*model.encoder) +
                                                  (cfg.training.strict_paper ? 0 : parameter_count(*model.denoiser))},
                      {"encoder_parameters", parameter_count(*model.encoder)},
                      {"denoiser_parameters", parameter_count(*model.denoiser)},
                      {"autoencoder_parameters", parameter_count(*model.ae)},
                      {"classifier_parameters", parameter_count(*model.classifier)}});
  const auto history = train_sr(model, set, schedule, cfg.training, cfg.seed, *provider,
                                [&](const SrEpochStats& s) {
                                  log.write("epoch", {{"epoch", s.epoch},
                                                      {"loss", s.loss},
                                                      {"probe_loss", s.probe_loss},
                                                      {"learning_rate", s.learning_rate},
                                                      {"frozen_grad_norm", s.frozen_grad_norm},
                                                      {"prompts_rendered", s.prompts_rendered},
                                                      {"seconds", s.seconds}});
                                },
                                prompt_log);
  save_sr_checkpoint(paths.sr(), model, cfg, schedule);
  log.write("done", {{"final_loss", history.back().loss}, {"seconds", seconds_since(t0)}});
  out << "train-sr: " << history.size() << " epochs, final loss " << std::setprecision(5) << history.back().loss
      << "\n";
}

fs::path run_upsample(const StageOptions& o, std::ostream& out) {
  if (!o.input) throw ArgumentError("upsample needs --input");
  RunConfig cfg = resolve_config(o, false, false);
  const RunPaths paths{o.run_dir};
  require(paths.sr(), "train-sr");
  if (!fs::exists(*o.input)) throw DependencyError("missing input image " + o.input->string());
  NoiseSchedule schedule;
  auto model = load_sr_checkpoint(paths.sr(), nullptr, &schedule);
  const auto opts = sampler_options(cfg, o);
  const Image lr = read_png(*o.input);
  const Image sr = sample(lr, model, schedule, opts);
  const fs::path target = o.output ? *o.output : o.run_dir / "upsample" / (o.input->stem().string() + "_sr.png");
  write_png(target, sr);
  StageLog log(paths.log("upsample"), "upsample");
  log.write("done", {{"input", o.input->string()}, {"output", target.string()}, {"steps", opts.steps},
                     {"eta", opts.eta}, {"seed", opts.seed}});
  out << "upsample: wrote " << target.string() << " (" << sr.width << "x" << sr.height << ")\n";
  return target;
}

MetricsReport run_evaluate(const StageOptions& o, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = resolve_config(o, false, false);
  const RunPaths paths{o.run_dir};
  const Manifest m = read_manifest(o.run_dir);
  require(paths.sr(), "train-sr");
  NoiseSchedule schedule;
  RunConfig model_cfg;
  auto model = load_sr_checkpoint(paths.sr(), &model_cfg, &schedule);
  const auto opts = sampler_options(cfg, o);
  StageLog log(paths.log("evaluate"), "evaluate");
  log.write("start", {{"config_fingerprint", fingerprint(cfg)}, {"steps", opts.steps}, {"eta", opts.eta},
                      {"seed", opts.seed}});

  auto data = load_split(m, Split::Test, o.run_dir, true, true, true, cfg.eval.max_images);
  auto sr = sample(data.lr, model, schedule, opts, cfg.eval.batch_size);
  for (std::size_t i = 0; i < sr.size(); ++i) {
    write_png(paths.eval_dir() / "model" / (safe_file(data.records[i]->id) + ".png"), sr[i]);
  }
  ClassifierPredictor predictor(model.classifier);
  ClassifierEmbedder embedder(model.classifier,
                              "ship-classifier-penultimate-" + std::to_string(cfg.classifier.embed_dim));
  std::map<std::string, std::vector<Image>> methods{{"lr_reference", data.ref}, {"model", sr}};
  auto result = comparison_report(methods, data.hr, data.labels, predictor, embedder, cfg.eval.grid_rows,
                                  fingerprint(cfg));
  fs::create_directories(paths.eval_dir());
  {
    std::ofstream f(paths.report(), std::ios::trunc);
    f << report_to_json(result.report).dump(2) << "\n";
  }
  write_png(paths.grid(), result.grid);
  json methods_json = report_to_json(result.report)["methods"];
  log.write("done", {{"methods", methods_json}, {"images", sr.size()}, {"seconds", seconds_since(t0)}});
  out << format_report_table(result.report);
  return result.report;
}

void run_report(const StageOptions& o, std::ostream& out) {
  const RunPaths paths{o.run_dir};
  require(paths.report(), "evaluate");
  std::ifstream f(paths.report());
  MetricsReport report;
  try {
    report = report_from_json(json::parse(f));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report.json: ") + e.what());
  }
  const std::string table = format_report_table(report);
  std::ofstream(paths.eval_dir() / "report.txt", std::ios::trunc) << table;
  out << table;
}

std::string format_report_table(const MetricsReport& report) {
  std::ostringstream s;
  s << "config " << report.config_fingerprint << ", embedder " << report.embedder_id << "\n";
  s << std::left << std::setw(14) << "method" << std::right << std::setw(10) << "PSNR" << std::setw(10) << "SSIM"
    << std::setw(10) << "FID" << std::setw(10) << "accuracy" << "\n";
  for (const auto& [name, mm] : report.methods) {
    s << std::left << std::setw(14) << name << std::right << std::fixed << std::setprecision(3) << std::setw(10)
      << mm.psnr << std::setw(10) << mm.ssim << std::setw(10) << mm.fid << std::setw(10) << mm.accuracy << "\n";
  }
  return s.str();
}

}  // namespace shipsr
