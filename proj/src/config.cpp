#include "pathcaps/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "pathcaps/errors.hpp"

namespace pathcaps {

void RunConfig::validate() const {
  net.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (limit_train < 0 || limit_test < 0) throw ConfigError("limits must be >= 0");
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j = spec_to_json(cfg.net);
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["trials"] = cfg.trials;
  j["data_dir"] = cfg.data_dir;
  j["out_dir"] = cfg.out_dir;
  j["limit_train"] = cfg.limit_train;
  j["limit_test"] = cfg.limit_test;
  j["eval_test_per_epoch"] = cfg.eval_test_per_epoch;
  j["timing"] = cfg.timing;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "architecture", "paths",      "variant",     "routing",
      "iterations",   "drop_circuit", "reconstruction", "seed",
      "epochs",       "batch_size", "trials",      "data_dir",
      "out_dir",      "limit_train", "limit_test", "eval_test_per_epoch",
      "timing"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  RunConfig cfg;
  nlohmann::json spec_json = spec_to_json(cfg.net);  // defaults
  for (const char* key : {"architecture", "paths", "variant", "routing", "iterations",
                          "drop_circuit", "reconstruction", "seed"})
    if (j.contains(key)) spec_json[key] = j.at(key);
  try {
    cfg.net = spec_from_json(spec_json);
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int64_t>();
    if (j.contains("trials")) cfg.trials = j.at("trials").get<int>();
    if (j.contains("data_dir")) cfg.data_dir = j.at("data_dir").get<std::string>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("limit_train")) cfg.limit_train = j.at("limit_train").get<int64_t>();
    if (j.contains("limit_test")) cfg.limit_test = j.at("limit_test").get<int64_t>();
    if (j.contains("eval_test_per_epoch"))
      cfg.eval_test_per_epoch = j.at("eval_test_per_epoch").get<bool>();
    if (j.contains("timing")) cfg.timing = j.at("timing").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field mistyped: ") + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  return run_config_from_json(j);
}

void write_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << run_config_to_json(cfg).dump(2) << "\n";
}

DataPaths mnist_paths(const std::string& data_dir) {
  DataPaths p;
  p.train_images = data_dir + "/train-images-idx3-ubyte";
  p.train_labels = data_dir + "/train-labels-idx1-ubyte";
  p.test_images = data_dir + "/t10k-images-idx3-ubyte";
  p.test_labels = data_dir + "/t10k-labels-idx1-ubyte";
  return p;
}

}  // namespace pathcaps
