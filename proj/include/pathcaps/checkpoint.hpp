#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "pathcaps/adam.hpp"
#include "pathcaps/model.hpp"
#include "pathcaps/params.hpp"

namespace pathcaps {

// Versioned binary container: magic "PCAP", format version, a canonical JSON
// header (spec, optimizer scalars, rng stream states, extras), then named
// shape-prefixed f64 arrays (parameters followed by Adam moments). Loading
// reproduces every tensor bitwise; a second save is byte-identical.
struct Checkpoint {
  NetworkSpec spec;
  ParamStore params;
  AdamConfig adam_config;
  int64_t adam_t = 0;
  ParamStore adam_m;
  ParamStore adam_v;
  bool has_adam = false;
  std::string rng_state;  // serialized trainer stream states, may be empty
  int epoch = 0;
  double val_error_pct = 0.0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pathcaps
