#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pathcaps/checkpoint.hpp"
#include "pathcaps/commands.hpp"
#include "pathcaps/errors.hpp"

using namespace pathcaps;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* tag) {
    path = std::filesystem::temp_directory_path() /
           (std::string("pathcaps-cli-") + tag + "-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("run config: json round-trip covers every field") {
  RunConfig cfg;
  cfg.net.arch = Architecture::PathCapsNet;
  cfg.net.paths = 10;
  cfg.net.routing = RoutingMode::FanIn;
  cfg.net.drop.enabled = true;
  cfg.net.seed = 21;
  cfg.epochs = 7;
  cfg.batch_size = 64;
  cfg.trials = 3;
  cfg.data_dir = "/somewhere";
  cfg.out_dir = "out/x";
  cfg.limit_train = 1000;
  cfg.limit_test = 500;
  cfg.timing = true;
  RunConfig back = run_config_from_json(run_config_to_json(cfg));
  CHECK(run_config_to_json(back) == run_config_to_json(cfg));
}

TEST_CASE("run config: file values override defaults, unknown keys rejected") {
  TempDir tmp("config");
  {
    std::ofstream out(tmp.file("run.json"));
    out << R"({"paths": 4, "routing": "fan-out", "epochs": 2})";
  }
  RunConfig cfg = load_run_config(tmp.file("run.json"));
  CHECK(cfg.net.paths == 4);
  CHECK(cfg.net.routing == RoutingMode::FanOut);
  CHECK(cfg.epochs == 2);
  CHECK(cfg.batch_size == 128);  // untouched default

  {
    std::ofstream out(tmp.file("bad.json"));
    out << R"({"path_count": 4})";
  }
  CHECK_THROWS_AS(load_run_config(tmp.file("bad.json")), ConfigError);
  {
    std::ofstream out(tmp.file("mistyped.json"));
    out << R"({"epochs": "three"})";
  }
  CHECK_THROWS_AS(load_run_config(tmp.file("mistyped.json")), ConfigError);
  CHECK_THROWS_AS(load_run_config(tmp.file("missing.json")), ConfigError);
}

TEST_CASE("resolved config written next to artifacts reproduces the run settings") {
  TempDir tmp("resolved");
  RunConfig cfg;
  cfg.net.paths = 3;
  cfg.net.seed = 5;
  cfg.out_dir = tmp.file("out");
  cfg.data_dir = tmp.file("nodata");
  write_run_config(cfg, tmp.file("resolved.json"));
  RunConfig back = load_run_config(tmp.file("resolved.json"));
  CHECK(run_config_to_json(back) == run_config_to_json(cfg));
}

TEST_CASE("cmd_train: missing data files raise ConfigError (exit code 2 at the CLI)") {
  TempDir tmp("train-missing");
  RunConfig cfg;
  cfg.net.paths = 1;
  cfg.data_dir = tmp.file("absent");
  cfg.out_dir = tmp.file("out");
  std::ostringstream out, log;
  try {
    cli::cmd_train(cfg, out, log);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(tmp.file("absent")) != std::string::npos);
  }

  cfg.data_dir.clear();
  CHECK_THROWS_AS(cli::cmd_train(cfg, out, log), ConfigError);
}

TEST_CASE("cmd_eval: corrupted checkpoint raises FormatError (non-zero exit)") {
  TempDir tmp("eval-bad");
  {
    std::ofstream out(tmp.file("bad.ckpt"), std::ios::binary);
    out << "not a checkpoint";
  }
  std::ostringstream out;
  CHECK_THROWS_AS(cli::cmd_eval(tmp.file("bad.ckpt"), tmp.file("data"), "", 0, out),
                  FormatError);
}

TEST_CASE("cmd_params prints the exact totals") {
  auto run = [](NetworkSpec spec) {
    std::ostringstream out;
    cli::cmd_params(spec, out);
    return out.str();
  };

  NetworkSpec base;
  base.arch = Architecture::CapsNetBaseline;
  CHECK(run(base).find("6,804,224") != std::string::npos);
  base.reconstruction = true;
  CHECK(run(base).find("8,215,568") != std::string::npos);

  NetworkSpec pc;
  pc.arch = Architecture::PathCapsNet;
  pc.paths = 10;
  pc.reconstruction = true;
  std::string text = run(pc);
  CHECK(text.find("739,440") != std::string::npos);
  CHECK(text.find("627,200") != std::string::npos);
  CHECK(text.find("1,411,344") != std::string::npos);
  CHECK(text.find("2,777,984") != std::string::npos);
  CHECK(text.find("note:") == std::string::npos);

  pc.variant = PathVariant::Table1Literal;
  pc.paths = 5;
  pc.reconstruction = false;
  std::string t1 = run(pc);
  CHECK(t1.find("579,560") != std::string::npos);
  CHECK(t1.find("note:") != std::string::npos);  // totals differ from the matched variant
}

TEST_CASE("group_digits") {
  CHECK(cli::group_digits(0) == "0");
  CHECK(cli::group_digits(999) == "999");
  CHECK(cli::group_digits(683320) == "683,320");
  CHECK(cli::group_digits(6804224) == "6,804,224");
  CHECK(cli::group_digits(-12345) == "-12,345");
}

TEST_CASE("cmd_gradcheck: negative control fails when a backward rule is corrupted") {
  cli::GradcheckOptions opts;
  opts.seed = 0;
  opts.coords_per_tensor = 1;
  std::ostringstream out;
  opts.corrupt_backward = true;
  CHECK(cli::cmd_gradcheck(opts, out) == 1);
  CHECK(out.str().find("FAIL") != std::string::npos);
}

TEST_CASE("cmd_perturb: refuses checkpoints without a decoder") {
  TempDir tmp("perturb");
  NetworkSpec spec;
  spec.paths = 1;
  spec.variant = PathVariant::Table1Literal;
  Rng rng(1);
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.params = init_params(spec, rng);
  save_checkpoint(ckpt, tmp.file("plain.ckpt"));

  cli::PerturbOptions opts;
  opts.checkpoint_path = tmp.file("plain.ckpt");
  opts.data_dir = tmp.file("data");
  std::ostringstream out;
  CHECK_THROWS_AS(cli::cmd_perturb(opts, out), ConfigError);
}
