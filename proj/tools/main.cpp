#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pathcaps/commands.hpp"
#include "pathcaps/errors.hpp"

namespace {

using namespace pathcaps;

Architecture parse_arch(const std::string& s) {
  if (s == "pathcaps") return Architecture::PathCapsNet;
  if (s == "capsnet") return Architecture::CapsNetBaseline;
  throw ConfigError("unknown architecture '" + s + "' (expected pathcaps|capsnet)");
}

RoutingMode parse_routing(const std::string& s) {
  if (s == "fan-in") return RoutingMode::FanIn;
  if (s == "fan-out") return RoutingMode::FanOut;
  throw ConfigError("unknown routing '" + s + "' (expected fan-in|fan-out)");
}

PathVariant parse_variant(const std::string& s) {
  if (s == "table1") return PathVariant::Table1Literal;
  if (s == "table2") return PathVariant::Table2Matched;
  throw ConfigError("unknown variant '" + s + "' (expected table1|table2)");
}

std::string env_data_dir() {
  const char* env = std::getenv("PATHCAPS_DATA_DIR");
  return env ? env : "";
}

// Flag values shared by train and the spec-driven subcommands. Flags the
// user actually passed override the config file, which overrides defaults.
struct SpecFlags {
  std::string arch, routing, variant;
  int paths = 0, iterations = 0;
  bool drop_circuit = false, recon = false;
  double drop_prob = 0.0;
  uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--arch", arch, "Architecture: pathcaps|capsnet");
    cmd->add_option("--paths", paths, "Number of paths");
    cmd->add_option("--variant", variant, "Path stack variant: table1|table2");
    cmd->add_option("--routing", routing, "Routing mode: fan-in|fan-out");
    cmd->add_option("--iterations", iterations, "Routing iterations");
    cmd->add_flag("--drop-circuit", drop_circuit, "Enable DropCircuit path dropping");
    cmd->add_option("--drop-prob", drop_prob, "Path drop probability");
    cmd->add_flag("--recon", recon, "Enable the reconstruction decoder");
    cmd->add_option("--seed", seed, "Base rng seed");
  }

  void apply(const CLI::App* cmd, NetworkSpec& spec) const {
    if (cmd->count("--arch")) spec.arch = parse_arch(arch);
    if (cmd->count("--paths")) spec.paths = paths;
    if (cmd->count("--variant")) spec.variant = parse_variant(variant);
    if (cmd->count("--routing")) spec.routing = parse_routing(routing);
    if (cmd->count("--iterations")) spec.iterations = iterations;
    if (cmd->count("--drop-circuit")) spec.drop.enabled = true;
    if (cmd->count("--drop-prob")) spec.drop.drop_prob = drop_prob;
    if (cmd->count("--recon")) spec.reconstruction = true;
    if (cmd->count("--seed")) spec.seed = seed;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"PathCapsNet: multipath capsule networks with fan-in/fan-out routing"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and keep the best checkpoint");
  std::string train_config, train_data_dir, train_out_dir;
  int train_epochs = 0, train_trials = 0;
  int64_t train_batch = 0, limit_train = 0, limit_test = 0;
  bool train_timing = false, train_eval_test = false;
  SpecFlags train_spec;
  train_cmd->add_option("--config", train_config, "JSON config file");
  train_spec.attach(train_cmd);
  train_cmd->add_option("--trials", train_trials, "Trials at seeds s, s+1, ...");
  train_cmd->add_option("--epochs", train_epochs, "Training epochs");
  train_cmd->add_option("--batch-size", train_batch, "Minibatch size");
  train_cmd->add_option("--data-dir", train_data_dir, "Directory with MNIST IDX files");
  train_cmd->add_option("--out-dir", train_out_dir, "Output directory");
  train_cmd->add_option("--limit-train", limit_train, "Use only the first N training images");
  train_cmd->add_option("--limit-test", limit_test, "Use only the first N test images");
  train_cmd->add_flag("--timing", train_timing, "Record wall seconds in metrics.csv");
  train_cmd->add_flag("--eval-test-per-epoch", train_eval_test,
                      "Evaluate the test set every epoch");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test set");
  std::string eval_ckpt, eval_data_dir, eval_out_dir;
  int64_t eval_limit = 0;
  eval_cmd->add_option("checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data-dir", eval_data_dir, "Directory with MNIST IDX files");
  eval_cmd->add_option("--out-dir", eval_out_dir, "Where to write eval.csv (optional)");
  eval_cmd->add_option("--limit", eval_limit, "Use only the first N test images");

  // params
  auto* params_cmd = app.add_subcommand("params", "Print the exact parameter count");
  SpecFlags params_spec;
  params_spec.attach(params_cmd);

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  cli::GradcheckOptions grad_opts;
  grad_cmd->add_option("--seed", grad_opts.seed, "Rng seed for the probe instance");
  grad_cmd->add_option("--coords-per-tensor", grad_opts.coords_per_tensor,
                       "Sampled coordinates per parameter tensor");
  grad_cmd->add_flag("--corrupt-backward", grad_opts.corrupt_backward,
                     "Inject a wrong backward rule (negative control)")
      ->group("");

  // perturb
  auto* perturb_cmd = app.add_subcommand("perturb", "Decode swept output-capsule dimensions");
  cli::PerturbOptions perturb_opts;
  perturb_cmd->add_option("checkpoint", perturb_opts.checkpoint_path, "Checkpoint file")
      ->required();
  perturb_cmd->add_option("--data-dir", perturb_opts.data_dir, "Directory with MNIST IDX files");
  perturb_cmd->add_option("--index", perturb_opts.index, "Test image index");
  perturb_cmd->add_option("--digit", perturb_opts.digit,
                          "Capsule to perturb (default: argmax length)");
  perturb_cmd->add_option("--dims", perturb_opts.dims, "Dimensions to sweep");
  perturb_cmd->add_option("--lo", perturb_opts.lo, "Sweep start");
  perturb_cmd->add_option("--hi", perturb_opts.hi, "Sweep end");
  perturb_cmd->add_option("--step", perturb_opts.step, "Sweep step");
  perturb_cmd->add_option("--out", perturb_opts.out_path, "Output PGM path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (train_cmd->parsed()) {
    RunConfig cfg;
    if (train_cmd->count("--config")) cfg = load_run_config(train_config);
    train_spec.apply(train_cmd, cfg.net);
    if (train_cmd->count("--trials")) cfg.trials = train_trials;
    if (train_cmd->count("--epochs")) cfg.epochs = train_epochs;
    if (train_cmd->count("--batch-size")) cfg.batch_size = train_batch;
    if (train_cmd->count("--data-dir")) cfg.data_dir = train_data_dir;
    if (train_cmd->count("--out-dir")) cfg.out_dir = train_out_dir;
    if (train_cmd->count("--limit-train")) cfg.limit_train = limit_train;
    if (train_cmd->count("--limit-test")) cfg.limit_test = limit_test;
    if (train_cmd->count("--timing")) cfg.timing = true;
    if (train_cmd->count("--eval-test-per-epoch")) cfg.eval_test_per_epoch = true;
    if (cfg.data_dir.empty()) cfg.data_dir = env_data_dir();
    return cli::cmd_train(cfg, std::cout, std::cerr);
  }
  if (eval_cmd->parsed()) {
    if (eval_data_dir.empty()) eval_data_dir = env_data_dir();
    return cli::cmd_eval(eval_ckpt, eval_data_dir, eval_out_dir, eval_limit, std::cout);
  }
  if (params_cmd->parsed()) {
    NetworkSpec spec;
    params_spec.apply(params_cmd, spec);
    return cli::cmd_params(spec, std::cout);
  }
  if (grad_cmd->parsed()) return cli::cmd_gradcheck(grad_opts, std::cout);
  if (perturb_cmd->parsed()) {
    if (perturb_opts.data_dir.empty()) perturb_opts.data_dir = env_data_dir();
    return cli::cmd_perturb(perturb_opts, std::cout);
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const pathcaps::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
