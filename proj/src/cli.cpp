#include "shipsr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <ostream>

#include "shipsr/errors.hpp"
#include "shipsr/pipeline.hpp"

namespace shipsr {

void configure_threads() {
  int workers = 1;
  if (const char* env = std::getenv("SR_NUM_WORKERS"); env != nullptr && *env != '\0') {
    try {
      std::size_t used = 0;
      workers = std::stoi(env, &used);
      if (used != std::string(env).size() || workers < 1) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw ConfigurationError(std::string("SR_NUM_WORKERS must be a positive integer, got '") + env + "'");
    }
  }
  torch::set_num_threads(workers);
}

namespace {

void add_common(CLI::App* cmd, StageOptions& o, std::string& run_dir, std::string& config, std::uint64_t& seed,
                int& factor, std::int64_t& steps, double& eta) {
  cmd->add_option("--run-dir", run_dir, "run directory")->required();
  cmd->add_option("--config", config, "run config JSON");
  cmd->add_option("--seed", seed, "global seed");
  cmd->add_option("--factor", factor, "downscale factor")->check(CLI::PositiveNumber);
  cmd->add_option("--steps", steps, "sampler steps")->check(CLI::PositiveNumber);
  cmd->add_option("--eta", eta, "DDIM eta")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--device", o.device, "compute device");
  cmd->add_flag("--strict-paper", o.strict_paper, "freeze the denoiser and train the condition encoder only");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ship image super-resolution", "sr"};
  app.require_subcommand(1);
  StageOptions o;
  std::string run_dir, config, root, input, output, init;
  std::uint64_t seed = 0;
  int factor = 0;
  std::int64_t steps = 0;
  double eta = 0.0;

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"dataset-build", "ingest a corpus and materialise HR/LR/reference pairs"},
      {"train-classifier", "pre-train the ship category classifier"},
      {"train-sr", "train the latent diffusion super-resolution model"},
      {"upsample", "super-resolve one LR image"},
      {"evaluate", "score the model against the bicubic reference on the test split"},
      {"report", "print the last evaluation report"}};
  std::map<std::string, CLI::App*> cmds;
  for (const auto& [name, help] : stages) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, o, run_dir, config, seed, factor, steps, eta);
    cmds[name] = cmd;
  }
  cmds["dataset-build"]->add_option("--root", root, "corpus root with one directory per category")->required();
  cmds["train-sr"]->add_option("--init", init, "warm-start from an SR checkpoint");
  cmds["upsample"]->add_option("--input", input, "LR image (PNG)")->required();
  cmds["upsample"]->add_option("--output", output, "output PNG");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  auto* chosen = app.get_subcommands().front();
  const std::string stage = chosen->get_name();
  o.run_dir = run_dir;
  if (!config.empty()) o.config_path = config;
  if (chosen->count("--seed") > 0) o.seed = seed;
  if (chosen->count("--factor") > 0) o.factor = factor;
  if (chosen->count("--steps") > 0) o.steps = steps;
  if (chosen->count("--eta") > 0) o.eta = eta;
  if (!root.empty()) o.root = root;
  if (!input.empty()) o.input = input;
  if (!output.empty()) o.output = output;
  if (!init.empty()) o.init = init;

  try {
    configure_threads();
    if (stage == "dataset-build") {
      run_dataset_build(o, out);
    } else if (stage == "train-classifier") {
      run_train_classifier(o, out);
    } else if (stage == "train-sr") {
      run_train_sr(o, out);
    } else if (stage == "upsample") {
      run_upsample(o, out);
    } else if (stage == "evaluate") {
      run_evaluate(o, out);
    } else {
      run_report(o, out);
    }
  } catch (const DependencyError& e) {
    err << stage << ": dependency error: " << e.what() << "\n";
    return kExitDependency;
  } catch (const Error& e) {
    err << stage << ": error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    msg = msg.substr(0, msg.find('\n'));
    err << stage << ": error: " << msg << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace shipsr
