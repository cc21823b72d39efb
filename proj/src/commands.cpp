#include "pathcaps/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "pathcaps/checkpoint.hpp"
#include "pathcaps/errors.hpp"
#include "pathcaps/gradcheck.hpp"
#include "pathcaps/kernels.hpp"
#include "pathcaps/ops.hpp"
#include "pathcaps/pgm.hpp"
#include "pathcaps/trainer.hpp"

namespace pathcaps::cli {

namespace {

void require_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("data file not found: " + path);
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

std::string group_digits(int64_t v) {
  std::string raw = std::to_string(v);
  std::string out;
  int count = 0;
  for (auto it = raw.rbegin(); it != raw.rend(); ++it) {
    if (count && count % 3 == 0 && *it != '-') out.push_back(',');
    out.push_back(*it);
    ++count;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  cfg.validate();
  if (cfg.data_dir.empty())
    throw ConfigError("no data directory (use --data-dir, the config file, or PATHCAPS_DATA_DIR)");
  DataPaths paths = mnist_paths(cfg.data_dir);
  require_file(paths.train_images);
  require_file(paths.train_labels);
  require_file(paths.test_images);
  require_file(paths.test_labels);

  std::filesystem::create_directories(cfg.out_dir);
  write_run_config(cfg, cfg.out_dir + "/resolved_config.json");

  Dataset full_train = load_dataset(paths.train_images, paths.train_labels).take(cfg.limit_train);
  Dataset test = load_dataset(paths.test_images, paths.test_labels).take(cfg.limit_test);

  std::vector<double> trial_test_errors;
  std::vector<double> trial_val_errors;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    NetworkSpec spec = cfg.net;
    spec.seed = cfg.net.seed + static_cast<uint64_t>(trial);
    std::string trial_dir = cfg.trials > 1
                                ? cfg.out_dir + "/trial-" + std::to_string(spec.seed)
                                : cfg.out_dir;

    SplitConfig split_cfg;
    split_cfg.split_seed = Rng::derive(spec.seed, "split");
    auto [train_set, val_set] = split(full_train, split_cfg);
    log << "seed " << spec.seed << ": train " << train_set.size() << ", val "
        << val_set.size() << ", test " << test.size() << "\n";

    TrainOptions topts;
    topts.epochs = cfg.epochs;
    topts.batch_size = cfg.batch_size;
    topts.out_dir = trial_dir;
    topts.eval_test_per_epoch = cfg.eval_test_per_epoch;
    topts.timing = cfg.timing;
    topts.log = &log;
    TrainResult result = train(spec, train_set, val_set, &test, topts);

    Checkpoint best = load_checkpoint(result.checkpoint_path);
    EvalResult test_eval = evaluate(best.spec, best.params, test);
    {
      std::ofstream csv(trial_dir + "/test_eval.csv", std::ios::trunc);
      csv << "test_error_pct,margin_loss,recon_loss,count\n"
          << csv_double(test_eval.error_pct) << "," << csv_double(test_eval.margin_loss) << ","
          << csv_double(test_eval.recon_loss) << "," << test_eval.count << "\n";
    }
    out << "seed " << spec.seed << ": best epoch " << result.best_epoch << ", val error "
        << csv_double(result.best_val_error_pct) << "%, test error "
        << csv_double(test_eval.error_pct) << "%\n";
    trial_test_errors.push_back(test_eval.error_pct);
    trial_val_errors.push_back(result.best_val_error_pct);
  }

  if (cfg.trials > 1) {
    auto mean_std = [](const std::vector<double>& xs) {
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= static_cast<double>(xs.size() - 1);  // sample std
      return std::pair<double, double>(mean, std::sqrt(var));
    };
    auto [tm, ts] = mean_std(trial_test_errors);
    auto [vm, vs] = mean_std(trial_val_errors);
    out << "trials " << cfg.trials << ": test error " << csv_double(tm) << " +- "
        << csv_double(ts) << "%, val error " << csv_double(vm) << " +- " << csv_double(vs)
        << "%\n";
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::string& out_dir, int64_t limit, std::ostream& out) {
  if (data_dir.empty())
    throw ConfigError("no data directory (use --data-dir, the config file, or PATHCAPS_DATA_DIR)");
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  DataPaths paths = mnist_paths(data_dir);
  require_file(paths.test_images);
  require_file(paths.test_labels);
  Dataset test = load_dataset(paths.test_images, paths.test_labels).take(limit);

  EvalResult res = evaluate(ckpt.spec, ckpt.params, test);
  out << "test error: " << csv_double(res.error_pct) << "% (" << res.count << " samples)\n";
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream csv(out_dir + "/eval.csv", std::ios::trunc);
    if (!csv) throw ConfigError("cannot write '" + out_dir + "/eval.csv'");
    csv << "test_error_pct,margin_loss,recon_loss,count\n"
        << csv_double(res.error_pct) << "," << csv_double(res.margin_loss) << ","
        << csv_double(res.recon_loss) << "," << res.count << "\n";
  }
  return 0;
}

int cmd_params(const NetworkSpec& spec, std::ostream& out) {
  spec.validate();
  ParamCount count = count_parameters(spec);
  out << "architecture: " << architecture_name(spec.arch);
  if (spec.arch == Architecture::PathCapsNet)
    out << " (" << path_variant_name(spec.variant) << ", " << spec.paths << " paths)";
  out << ", reconstruction " << (spec.reconstruction ? "on" : "off") << "\n";

  if (spec.arch == Architecture::PathCapsNet) {
    out << "  conv paths       " << group_digits(count.conv_layers) << "  ("
        << group_digits(count.per_path) << " per path)\n";
  } else {
    out << "  conv stem        " << group_digits(count.conv_layers) << "\n";
  }
  out << "  routing weights  " << group_digits(count.routing_weights) << "\n";
  if (spec.reconstruction) out << "  decoder          " << group_digits(count.decoder) << "\n";
  out << "  total            " << group_digits(count.total) << "\n";
  if (spec.arch == Architecture::PathCapsNet && spec.variant == PathVariant::Table1Literal)
    out << "note: variant table1 (" << group_digits(count.per_path)
        << " per path) does not reproduce the table2-matched reference totals "
           "(73,944 per path)\n";
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out) {
  pathcaps::testing::corrupt_conv_bias_backward = opts.corrupt_backward;
  bool all_pass = true;

  for (RoutingMode mode : {RoutingMode::FanIn, RoutingMode::FanOut}) {
    NetworkSpec spec;
    spec.arch = Architecture::PathCapsNet;
    spec.paths = 2;
    spec.variant = PathVariant::Table2Matched;
    spec.routing = mode;
    spec.iterations = 3;
    spec.drop.enabled = true;
    spec.drop.drop_prob = 0.5;
    spec.reconstruction = true;
    spec.seed = opts.seed;

    Rng init_rng(Rng::derive(opts.seed, "gradcheck-init"));
    ParamStore params = init_params(spec, init_rng);

    Rng data_rng(Rng::derive(opts.seed, "gradcheck-data"));
    Tensor image(Shape{1, 1, 28, 28});
    for (double& v : image.values()) v = data_rng.uniform01();
    std::vector<int> labels = {static_cast<int>(data_rng.uniform_int(10))};

    // Fixed mask exercising both a kept and a dropped path.
    DropMasks masks;
    masks.per_sample = false;
    masks.masks.push_back(PathMask{{1, 0}, 0, 0});

    auto loss_with = [&](const ParamStore& ps, Graph&) {
      ForwardOptions fopts;
      fopts.training = true;
      fopts.labels = &labels;
      fopts.forced_masks = &masks;
      ForwardOutput fwd = forward(spec, ps, image, fopts);
      Tensor loss = margin_loss(fwd.lengths, labels);
      return ops::add(loss, reconstruction_loss(fwd.reconstruction, image));
    };

    Rng coord_rng(Rng::derive(opts.seed, "gradcheck-coords"));
    double worst = 0.0;
    std::string worst_name = "-";
    for (const auto& name : params.names()) {
      const Tensor& p = params.at(name);
      std::vector<int64_t> coords;
      for (int c = 0; c < opts.coords_per_tensor; ++c)
        coords.push_back(coord_rng.uniform_int(p.numel()));
      TensorFn f = [&](Graph& g, const Tensor& x) {
        return loss_with(params.with_replaced(name, x), g);
      };
      double err = finite_diff_check_sampled(f, p, opts.eps, coords);
      if (err > worst) {
        worst = err;
        worst_name = name;
      }
    }
    bool pass = worst < opts.threshold;
    all_pass = all_pass && pass;
    out << "gradcheck " << routing_mode_name(mode) << ": max relative error " << sci(worst)
        << " (worst: " << worst_name << ", threshold " << sci(opts.threshold) << ") -> "
        << (pass ? "PASS" : "FAIL") << "\n";
  }
  pathcaps::testing::corrupt_conv_bias_backward = false;
  return all_pass ? 0 : 1;
}

int cmd_perturb(const PerturbOptions& opts, std::ostream& out) {
  Checkpoint ckpt = load_checkpoint(opts.checkpoint_path);
  if (!ckpt.spec.reconstruction)
    throw ConfigError("checkpoint '" + opts.checkpoint_path +
                      "' has no reconstruction decoder; perturb needs one");
  if (opts.data_dir.empty())
    throw ConfigError("no data directory (use --data-dir, the config file, or PATHCAPS_DATA_DIR)");
  DataPaths paths = mnist_paths(opts.data_dir);
  require_file(paths.test_images);
  require_file(paths.test_labels);
  Dataset test = load_dataset(paths.test_images, paths.test_labels);
  if (opts.index < 0 || opts.index >= test.size())
    throw ConfigError("image index " + std::to_string(opts.index) + " out of range [0," +
                      std::to_string(test.size()) + ")");

  Tensor image(Shape{1, 1, 28, 28});
  std::copy(test.images.values().begin() + opts.index * 784,
            test.images.values().begin() + (opts.index + 1) * 784, image.values().begin());

  PerturbationGrid grid = perturb_digitcaps(ckpt.spec, ckpt.params, image, opts.digit,
                                            opts.dims, opts.lo, opts.hi, opts.step);
  GridImage img = render_perturbation_grid(grid);
  write_pgm(opts.out_path, img.width, img.height, img.pixels);
  out << "perturbed capsule " << grid.digit << " (label " << test.labels[opts.index]
      << "), " << grid.dims.size() << " dims x " << grid.values.size()
      << " values -> " << opts.out_path << " (" << img.width << "x" << img.height << ")\n";
  return 0;
}

}  // namespace pathcaps::cli
