#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "shipsr/checkpoint.hpp"
#include "shipsr/cli.hpp"
#include "shipsr/errors.hpp"
#include "shipsr/pipeline.hpp"
#include "shipsr/png_io.hpp"
#include "shipsr/run_config.hpp"
#include "support.hpp"

using namespace shipsr;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig cli_config() {
  auto cfg = testing::tiny_config({"Tankers", "Tugs"});
  cfg.dataset.test_count = 10;
  cfg.eval.grid_rows = 2;
  return cfg;
}

// Corpus plus a config file; each test gets its own run directory.
struct Workspace {
  fs::path root;
  fs::path corpus;
  fs::path config;
};

const Workspace& workspace() {
  static const Workspace ws = [] {
    Workspace w;
    w.root = testing::scratch_dir("cli_workspace");
    w.corpus = w.root / "corpus";
    testing::write_toy_corpus(w.corpus, {"Tankers", "Tugs"}, 30, 72, 6);
    w.config = w.root / "tiny.json";
    save_run_config(w.config, cli_config());
    return w;
  }();
  return ws;
}

// dataset-build + train-classifier + train-sr, built once.
const fs::path& trained_run() {
  static const fs::path run = [] {
    const auto& ws = workspace();
    const fs::path dir = ws.root / "trained";
    fs::remove_all(dir);
    const auto d = dir.string();
    REQUIRE(cli({"dataset-build", "--run-dir", d, "--config", ws.config.string(), "--root", ws.corpus.string()}).code ==
            0);
    REQUIRE(cli({"train-classifier", "--run-dir", d}).code == 0);
    REQUIRE(cli({"train-sr", "--run-dir", d}).code == 0);
    return dir;
  }();
  return run;
}

}  // namespace

TEST_SUITE("cli_orchestrator") {
  TEST_CASE("config fingerprint tracks every field") {
    const auto base = cli_config();
    const auto fp = fingerprint(base);
    CHECK(fp.size() == 16);
    CHECK(fingerprint(run_config_from_json(to_json(base))) == fp);
    auto c = base;
    c.seed += 1;
    CHECK(fingerprint(c) != fp);
    c = base;
    c.training.learning_rate *= 2;
    CHECK(fingerprint(c) != fp);
    c = base;
    c.sampler.eta = 0.5;
    CHECK(fingerprint(c) != fp);
    c = base;
    c.dataset.taxonomy = {"Tugs", "Tankers"};
    CHECK(fingerprint(c) != fp);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  }

  TEST_CASE("config parsing") {
    auto j = to_json(cli_config());
    j["training"]["lerning_rate"] = 0.1;
    CHECK_THROWS_AS(run_config_from_json(j), ConfigurationError);
    auto bad = to_json(cli_config());
    bad["sampler"]["eta"] = 2.0;
    CHECK_THROWS_AS(run_config_from_json(bad), ConfigurationError);
    const auto partial = run_config_from_json(nlohmann::json{{"seed", 3}});
    CHECK(partial.seed == 3);
    CHECK(partial.schedule.timesteps == 200);
    CHECK_THROWS_AS(load_run_config(testing::scratch_dir("cli_noconfig") / "missing.json"), DependencyError);
  }

  TEST_CASE("usage and dependency exit codes") {
    const auto dir = testing::scratch_dir("cli_codes").string();
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"bogus-stage"}).code == kExitUsage);
    CHECK(cli({"dataset-build", "--run-dir", dir}).code == kExitUsage);
    CHECK(cli({"upsample", "--run-dir", dir}).code == kExitUsage);
    CHECK(cli({"evaluate", "--run-dir", dir, "--eta", "3"}).code == kExitUsage);

    auto r = cli({"train-classifier", "--run-dir", dir});
    CHECK(r.code == kExitDependency);
    CHECK(r.err.find("train-classifier") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
    CHECK(cli({"train-sr", "--run-dir", dir}).code == kExitDependency);
    CHECK(cli({"evaluate", "--run-dir", dir}).code == kExitDependency);
    CHECK(cli({"report", "--run-dir", dir}).code == kExitDependency);
    CHECK(cli({"train-classifier", "--run-dir", dir, "--device", "cuda"}).code == kExitDependency);
  }

  TEST_CASE("dataset-build writes the run layout") {
    const auto& ws = workspace();
    const auto dir = testing::scratch_dir("cli_dataset");
    const auto r = cli({"dataset-build", "--run-dir", dir.string(), "--config", ws.config.string(), "--root",
                        ws.corpus.string(), "--seed", "21"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "config.json"));
    CHECK(fs::exists(dir / "manifest.jsonl"));
    CHECK(fs::exists(dir / "corpus_meta.json"));
    CHECK(fs::exists(dir / "logs" / "dataset-build.jsonl"));
    const auto m = read_manifest(dir);
    CHECK(m.records.size() == 60);
    CHECK(m.meta.counts.at("test") == 10);
    for (const auto& rec : m.records) {
      CHECK(read_png(dir / rec.lr_path).height == 8);
      CHECK(read_png(dir / rec.hr_path).height == 64);
      CHECK(read_png(dir / rec.ref_path).height == 64);
    }
    const auto saved = load_run_config(dir / "config.json");
    CHECK(saved.seed == 21);

    CHECK(cli({"train-classifier", "--run-dir", dir.string(), "--factor", "4"}).code == kExitFailure);
  }

  TEST_CASE("invalid worker count") {
    const auto dir = testing::scratch_dir("cli_workers").string();
    ::setenv("SR_NUM_WORKERS", "zero", 1);
    const auto r = cli({"report", "--run-dir", dir});
    ::unsetenv("SR_NUM_WORKERS");
    CHECK(r.code == kExitFailure);
    CHECK(r.err.find("SR_NUM_WORKERS") != std::string::npos);
  }

  TEST_CASE("checkpoint validation") {
    const auto dir = testing::scratch_dir("cli_ckpt");
    const auto cfg = cli_config();
    auto model = testing::tiny_model(cfg);
    save_sr_checkpoint(dir / "sr.pt", model, cfg, cfg.noise_schedule());
    CHECK_NOTHROW(load_sr_checkpoint(dir / "sr.pt", nullptr, nullptr));
    CHECK_THROWS_AS(load_classifier_checkpoint(dir / "sr.pt", nullptr), DataError);
    CHECK_THROWS_AS(load_sr_checkpoint(dir / "missing.pt", nullptr, nullptr), DependencyError);

    CheckpointWriter w;
    w.kind = "sr";
    w.config = to_json(cfg);
    w.format_version = kCheckpointVersion + 1;
    w.save(dir / "future.pt");
    CHECK_THROWS_AS(CheckpointReader::open(dir / "future.pt", "sr"), DataError);

    std::ofstream(dir / "garbage.pt") << "not a checkpoint";
    CHECK_THROWS_AS(CheckpointReader::open(dir / "garbage.pt", "sr"), DataError);
  }

  TEST_CASE("end to end on a tiny run") {
    const auto& run = trained_run();
    const auto d = run.string();
    CHECK(fs::exists(run / "checkpoints" / "classifier.pt"));
    CHECK(fs::exists(run / "checkpoints" / "sr.pt"));
    CHECK(fs::exists(run / "logs" / "prompts.jsonl"));

    const Manifest manifest = read_manifest(run);
    const auto* rec = manifest.in_split(Split::Test).front();
    const auto lr = run / rec->lr_path;
    const auto out_a = run / "a.png";
    const auto out_b = run / "b.png";
    REQUIRE(cli({"upsample", "--run-dir", d, "--input", lr.string(), "--output", out_a.string(), "--eta", "0"}).code ==
            0);
    REQUIRE(cli({"upsample", "--run-dir", d, "--input", lr.string(), "--output", out_b.string(), "--eta", "0"}).code ==
            0);
    CHECK(slurp(out_a) == slurp(out_b));
    CHECK(read_png(out_a).height == 64);
    REQUIRE(cli({"upsample", "--run-dir", d, "--input", lr.string()}).code == 0);
    CHECK(fs::exists(run / "upsample" / (lr.stem().string() + "_sr.png")));
    CHECK(cli({"upsample", "--run-dir", d, "--input", (run / "nope.png").string()}).code == kExitDependency);
    CHECK(cli({"upsample", "--run-dir", d, "--input", lr.string(), "--factor", "4"}).code == kExitFailure);

    const auto before = slurp(run / "config.json");
    const auto ev = cli({"evaluate", "--run-dir", d, "--steps", "3"});
    REQUIRE(ev.code == 0);
    CHECK(slurp(run / "config.json") == before);
    const auto report = report_from_json(nlohmann::json::parse(slurp(run / "eval" / "report.json")));
    CHECK(report.methods.count("model") == 1);
    CHECK(report.methods.count("lr_reference") == 1);
    CHECK(report.config_fingerprint == fingerprint(load_run_config(run / "config.json")));
    CHECK(fs::exists(run / "eval" / "grid.png"));
    const auto rep = cli({"report", "--run-dir", d});
    CHECK(rep.code == 0);
    CHECK(rep.out.find("lr_reference") != std::string::npos);
  }

  TEST_CASE("run directories are isolated") {
    const auto& run = trained_run();
    const auto other = testing::scratch_dir("cli_isolated");
    const auto before = testing::list_files(run);
    CHECK(cli({"evaluate", "--run-dir", other.string()}).code == kExitDependency);
    CHECK((testing::list_files(run) == before));
  }

  TEST_CASE("strict mode warm start") {
    const auto& ws = workspace();
    const auto& run = trained_run();
    const auto dir = testing::scratch_dir("cli_strict");
    fs::copy(run / "manifest.jsonl", dir / "manifest.jsonl");
    fs::copy(run / "corpus_meta.json", dir / "corpus_meta.json");
    fs::copy(run / "pairs", dir / "pairs", fs::copy_options::recursive);
    fs::create_directories(dir / "checkpoints");
    fs::copy(run / "checkpoints" / "classifier.pt", dir / "checkpoints" / "classifier.pt");
    const auto r = cli({"train-sr", "--run-dir", dir.string(), "--config", ws.config.string(), "--strict-paper",
                        "--init", (run / "checkpoints" / "sr.pt").string()});
    REQUIRE(r.code == 0);
    CHECK(load_run_config(dir / "config.json").training.strict_paper);
    RunConfig cfg;
    auto warm = load_sr_checkpoint(dir / "checkpoints" / "sr.pt", &cfg, nullptr);
    auto base = load_sr_checkpoint(run / "checkpoints" / "sr.pt", nullptr, nullptr);
    const auto a = warm.denoiser->parameters();
    const auto b = base.denoiser->parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(torch::equal(a[i], b[i]));
  }
}
