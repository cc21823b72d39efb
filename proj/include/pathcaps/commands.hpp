#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pathcaps/config.hpp"
#include "pathcaps/model.hpp"

namespace pathcaps::cli {

// Subcommand bodies. Each returns a process exit code on its own failures
// and throws ConfigError / FormatError / etc. for the wrapper to map
// (0 success, 1 runtime failure, 2 usage or config error).

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& log);

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::string& out_dir, int64_t limit, std::ostream& out);

int cmd_params(const NetworkSpec& spec, std::ostream& out);

struct GradcheckOptions {
  uint64_t seed = 0;
  double eps = 1e-5;
  double threshold = 1e-4;
  int coords_per_tensor = 3;
  bool corrupt_backward = false;  // negative-control hook
};
int cmd_gradcheck(const GradcheckOptions& opts, std::ostream& out);

struct PerturbOptions {
  std::string checkpoint_path;
  std::string data_dir;
  std::string out_path = "perturb.pgm";
  int64_t index = 0;
  int digit = -1;  // argmax
  std::vector<int> dims = {0, 1, 2};
  double lo = -0.25;
  double hi = 0.25;
  double step = 0.05;
};
int cmd_perturb(const PerturbOptions& opts, std::ostream& out);

std::string group_digits(int64_t v);

}  // namespace pathcaps::cli
