#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "pathcaps/model.hpp"

namespace pathcaps {

// Full description of one run. Mirrors the JSON config file; every CLI flag
// maps onto one field, flags override file values, and the resolved form is
// written next to the run artifacts so a run can be reproduced from it.
struct RunConfig {
  NetworkSpec net;
  int epochs = 10;
  int64_t batch_size = 128;
  int trials = 1;
  std::string data_dir;
  std::string out_dir = "out";
  int64_t limit_train = 0;  // 0 = all
  int64_t limit_test = 0;   // 0 = all
  bool eval_test_per_epoch = false;
  bool timing = false;

  void validate() const;
};

nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
void write_run_config(const RunConfig& cfg, const std::string& path);

// Standard MNIST-style file names under a data directory.
struct DataPaths {
  std::string train_images, train_labels, test_images, test_labels;
};
DataPaths mnist_paths(const std::string& data_dir);

}  // namespace pathcaps
