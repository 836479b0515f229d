#include "shipsr/checkpoint.hpp"

#include "shipsr/errors.hpp"

namespace shipsr {

void CheckpointWriter::save(const std::filesystem::path& path) const {
  torch::serialize::OutputArchive archive;
  archive.write("format_version", c10::IValue(format_version));
  archive.write("kind", c10::IValue(kind));
  archive.write("config", c10::IValue(config.dump()));
  archive.write("rng_state", c10::IValue(rng_state));
  for (const auto& [name, module] : modules) {
    torch::serialize::OutputArchive sub;
    module->save(sub);
    archive.write("module." + name, sub);
  }
  if (schedule) {
    archive.write("schedule_betas", torch::tensor(schedule->betas, torch::kFloat64), /*is_buffer=*/true);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  archive.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

CheckpointReader CheckpointReader::open(const std::filesystem::path& path, const std::string& expected_kind) {
  if (!std::filesystem::exists(path)) throw DependencyError("missing checkpoint " + path.string());
  CheckpointReader r;
  r.path_ = path;
  r.archive_ = std::make_shared<torch::serialize::InputArchive>();
  try {
    r.archive_->load_from(path.string());
  } catch (const c10::Error& e) {
    throw DataError("unreadable checkpoint " + path.string());
  }
  c10::IValue v;
  if (!r.archive_->try_read("format_version", v) || !v.isInt()) {
    throw DataError("checkpoint " + path.string() + " has no format_version");
  }
  r.version = v.toInt();
  if (r.version > kCheckpointVersion) {
    throw DataError("checkpoint " + path.string() + " has unsupported version " + std::to_string(r.version));
  }
  if (!r.archive_->try_read("kind", v) || !v.isString()) throw DataError("checkpoint has no kind");
  r.kind = v.toStringRef();
  if (r.kind != expected_kind) {
    throw DataError("checkpoint " + path.string() + " is a '" + r.kind + "' checkpoint, expected '" + expected_kind + "'");
  }
  if (!r.archive_->try_read("config", v) || !v.isString()) throw DataError("checkpoint has no config");
  try {
    r.config = nlohmann::json::parse(v.toStringRef());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint config is not JSON");
  }
  if (r.archive_->try_read("rng_state", v) && v.isString()) r.rng_state = v.toStringRef();
  torch::Tensor betas;
  if (r.archive_->try_read("schedule_betas", betas, /*is_buffer=*/true)) {
    const auto b = betas.contiguous();
    r.schedule = NoiseSchedule::from_betas(std::vector<double>(b.data_ptr<double>(), b.data_ptr<double>() + b.numel()));
  }
  return r;
}

void CheckpointReader::load_module(const std::string& name, torch::nn::Module& module) const {
  torch::serialize::InputArchive sub;
  if (!archive_->try_read("module." + name, sub)) {
    throw DataError("checkpoint " + path_.string() + " lacks module '" + name + "'");
  }
  try {
    module.load(sub);
  } catch (const c10::Error& e) {
    throw DataError("checkpoint module '" + name + "' does not match the configured architecture");
  }
}

}  // namespace shipsr
