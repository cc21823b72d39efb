#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pathcaps/adam.hpp"
#include "pathcaps/data.hpp"
#include "pathcaps/model.hpp"

namespace pathcaps {

struct TrainOptions {
  int epochs = 1;
  int64_t batch_size = 128;
  std::string out_dir;
  bool eval_test_per_epoch = false;
  // Wall time per epoch is always reported on the log stream; the CSV
  // seconds column is only filled when timing is on, so metrics files from
  // equal runs stay byte-identical by default.
  bool timing = false;
  std::ostream* log = nullptr;
};

struct TrainRecord {
  int epoch = 0;  // 1-based
  double margin_loss = 0.0;
  double recon_loss = 0.0;
  double val_error_pct = 0.0;
  std::optional<double> test_error_pct;
  double seconds = 0.0;
};

struct EvalResult {
  double error_pct = 0.0;
  double margin_loss = 0.0;
  double recon_loss = 0.0;
  int64_t count = 0;
};

struct TrainResult {
  std::vector<TrainRecord> records;
  int best_epoch = 0;  // 1-based
  double best_val_error_pct = 0.0;
  std::string checkpoint_path;
  std::string metrics_path;
};

// Prediction = argmax capsule length; no augmentation, no DropCircuit.
EvalResult evaluate(const NetworkSpec& spec, const ParamStore& params, const Dataset& dataset,
                    int64_t batch_size = 256);

// Index of the lowest value; ties keep the earliest.
size_t best_epoch_index(const std::vector<double>& val_errors);

// Full protocol: per epoch, seeded-shuffled augmented minibatches through
// forward/backward/Adam, then a validation pass; the checkpoint with the
// lowest validation error is retained. Writes metrics.csv and best.ckpt
// under out_dir.
TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const Dataset& val_set,
                  const Dataset* test_set, const TrainOptions& options);

// Deterministic float text used in CSV artifacts.
std::string csv_double(double v);

}  // namespace pathcaps
