#include "pathcaps/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include "pathcaps/checkpoint.hpp"
#include "pathcaps/errors.hpp"
#include "pathcaps/graph.hpp"
#include "pathcaps/ops.hpp"

namespace pathcaps {

std::string csv_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

EvalResult evaluate(const NetworkSpec& spec, const ParamStore& params, const Dataset& dataset,
                    int64_t batch_size) {
  EvalResult res;
  Batcher batcher(dataset, batch_size);  // sequential order
  Batch batch;
  int64_t wrong = 0;
  double margin_total = 0.0, recon_total = 0.0;
  while (batcher.next(batch)) {
    ForwardOutput out = forward(spec, params, batch.images, ForwardOptions{});
    int64_t b = batch.images.dim(0);
    const auto& lengths = out.lengths.values();
    for (int64_t r = 0; r < b; ++r) {
      int64_t best = 0;
      for (int64_t j = 1; j < kNumClasses; ++j)
        if (lengths[r * kNumClasses + j] > lengths[r * kNumClasses + best]) best = j;
      if (static_cast<int>(best) != batch.labels[static_cast<size_t>(r)]) ++wrong;
    }
    margin_total += margin_loss(out.lengths, batch.labels).scalar_value() * b;
    if (spec.reconstruction)
      recon_total += reconstruction_loss(out.reconstruction, batch.images).scalar_value() * b;
    res.count += b;
  }
  if (res.count == 0) throw ContractError("evaluate: empty dataset");
  res.error_pct = 100.0 * static_cast<double>(wrong) / static_cast<double>(res.count);
  res.margin_loss = margin_total / static_cast<double>(res.count);
  res.recon_loss = recon_total / static_cast<double>(res.count);
  return res;
}

size_t best_epoch_index(const std::vector<double>& val_errors) {
  size_t best = 0;
  for (size_t i = 1; i < val_errors.size(); ++i)
    if (val_errors[i] < val_errors[best]) best = i;
  return best;
}

namespace {

std::string csv_row(const TrainRecord& rec, bool timing) {
  std::string row = std::to_string(rec.epoch);
  row += "," + csv_double(rec.margin_loss);
  row += "," + csv_double(rec.recon_loss);
  row += "," + csv_double(rec.val_error_pct);
  row += ",";
  if (rec.test_error_pct) row += csv_double(*rec.test_error_pct);
  row += ",";
  if (timing) row += csv_double(rec.seconds);
  return row;
}

}  // namespace

TrainResult train(const NetworkSpec& spec, const Dataset& train_set, const Dataset& val_set,
                  const Dataset* test_set, const TrainOptions& options) {
  spec.validate();
  if (options.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (options.out_dir.empty()) throw ConfigError("train requires an output directory");
  std::filesystem::create_directories(options.out_dir);

  Rng init_rng(Rng::derive(spec.seed, "init"));
  ParamStore params = init_params(spec, init_rng);
  AdamState adam(params);

  TrainResult result;
  result.metrics_path = options.out_dir + "/metrics.csv";
  result.checkpoint_path = options.out_dir + "/best.ckpt";

  std::ofstream csv(result.metrics_path, std::ios::trunc);
  if (!csv) throw ConfigError("cannot write '" + result.metrics_path + "'");
  csv << "epoch,train_margin_loss,train_recon_loss,val_error_pct,test_error_pct,seconds\n";
  csv.flush();

  double best_val = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    uint64_t e = static_cast<uint64_t>(epoch);
    Batcher batcher(train_set, options.batch_size, Rng::derive(spec.seed, "shuffle", e));
    Rng augment_rng(Rng::derive(spec.seed, "augment", e));
    Rng mask_rng(Rng::derive(spec.seed, "mask", e));

    double margin_total = 0.0, recon_total = 0.0;
    int64_t seen = 0;
    Batch batch;
    while (batcher.next(batch, &augment_rng)) {
      Graph graph;
      params.watch_all(graph);
      ForwardOptions fopts;
      fopts.training = true;
      fopts.labels = &batch.labels;
      fopts.mask_rng = &mask_rng;
      ForwardOutput out = forward(spec, params, batch.images, fopts);

      Tensor loss = margin_loss(out.lengths, batch.labels);
      double margin_value = loss.scalar_value();
      double recon_value = 0.0;
      if (spec.reconstruction) {
        Tensor recon = reconstruction_loss(out.reconstruction, batch.images);
        recon_value = recon.scalar_value();
        loss = ops::add(loss, recon);
      }
      int64_t b = batch.images.dim(0);
      if (!std::isfinite(margin_value) || !std::isfinite(recon_value))
        throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) +
                                 " after " + std::to_string(seen) + " samples (margin " +
                                 csv_double(margin_value) + ", recon " +
                                 csv_double(recon_value) + ")");
      margin_total += margin_value * b;
      recon_total += recon_value * b;
      seen += b;

      graph.backward(loss);
      adam.step(params);
    }

    EvalResult val = evaluate(spec, params, val_set);

    TrainRecord rec;
    rec.epoch = epoch;
    rec.margin_loss = margin_total / static_cast<double>(seen);
    rec.recon_loss = recon_total / static_cast<double>(seen);
    rec.val_error_pct = val.error_pct;
    if (options.eval_test_per_epoch && test_set)
      rec.test_error_pct = evaluate(spec, params, *test_set).error_pct;
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (val.error_pct < best_val) {  // strict: ties keep the earlier epoch
      best_val = val.error_pct;
      result.best_epoch = epoch;
      result.best_val_error_pct = val.error_pct;
      Checkpoint ckpt;
      ckpt.spec = spec;
      ckpt.params = params;
      ckpt.adam_config = adam.config();
      ckpt.adam_t = adam.t();
      ckpt.adam_m = adam.moments_m();
      ckpt.adam_v = adam.moments_v();
      ckpt.has_adam = true;
      ckpt.rng_state = "augment " + augment_rng.state() + "\nmask " + mask_rng.state();
      ckpt.epoch = epoch;
      ckpt.val_error_pct = val.error_pct;
      save_checkpoint(ckpt, result.checkpoint_path);
    }

    csv << csv_row(rec, options.timing) << "\n";
    csv.flush();
    if (options.log) {
      *options.log << "epoch " << epoch << "/" << options.epochs << "  margin "
                   << csv_double(rec.margin_loss) << "  recon " << csv_double(rec.recon_loss)
                   << "  val " << csv_double(rec.val_error_pct) << "%";
      if (rec.test_error_pct) *options.log << "  test " << csv_double(*rec.test_error_pct) << "%";
      *options.log << "  (" << csv_double(rec.seconds) << "s)" << std::endl;
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace pathcaps
