#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "shipsr/metrics.hpp"
#include "shipsr/run_config.hpp"

namespace shipsr {

// Flags shared by every stage. Config-level overrides (seed, factor,
// strict_paper) are persisted into <run_dir>/config.json; sampler overrides
// (steps, eta and the seed of upsample/evaluate) apply to one invocation.
struct StageOptions {
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> factor;
  std::optional<std::int64_t> steps;
  std::optional<double> eta;
  std::string device = "cpu";
  bool strict_paper = false;
  std::optional<std::filesystem::path> root;
  std::optional<std::filesystem::path> input;
  std::optional<std::filesystem::path> output;
  std::optional<std::filesystem::path> init;
};

// Layout of a run directory.
struct RunPaths {
  std::filesystem::path dir;

  std::filesystem::path config() const { return dir / "config.json"; }
  std::filesystem::path classifier() const { return dir / "checkpoints" / "classifier.pt"; }
  std::filesystem::path sr() const { return dir / "checkpoints" / "sr.pt"; }
  std::filesystem::path log(const std::string& stage) const { return dir / "logs" / (stage + ".jsonl"); }
  std::filesystem::path prompts() const { return dir / "logs" / "prompts.jsonl"; }
  std::filesystem::path eval_dir() const { return dir / "eval"; }
  std::filesystem::path report() const { return dir / "eval" / "report.json"; }
  std::filesystem::path grid() const { return dir / "eval" / "grid.png"; }
};

// Append-only JSON Lines log of one stage.
class StageLog {
 public:
  StageLog(const std::filesystem::path& path, std::string stage);
  void write(const std::string& event, nlohmann::json fields = nlohmann::json::object());

 private:
  std::filesystem::path path_;
  std::string stage_;
};

// Loads (--config, else <run_dir>/config.json, else defaults), applies the
// config-level flags and, when `persist`, writes config.json. Only the stage
// that builds the dataset may change the factor.
RunConfig resolve_config(const StageOptions& options, bool persist, bool builds_dataset = false);

void run_dataset_build(const StageOptions& options, std::ostream& out);
void run_train_classifier(const StageOptions& options, std::ostream& out);
void run_train_sr(const StageOptions& options, std::ostream& out);
std::filesystem::path run_upsample(const StageOptions& options, std::ostream& out);
MetricsReport run_evaluate(const StageOptions& options, std::ostream& out);
void run_report(const StageOptions& options, std::ostream& out);

std::string format_report_table(const MetricsReport& report);

}  // namespace shipsr
