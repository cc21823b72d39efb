#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "pathcaps/capsules.hpp"
#include "pathcaps/params.hpp"
#include "pathcaps/paths.hpp"
#include "pathcaps/rng.hpp"
#include "pathcaps/tensor.hpp"

namespace pathcaps {

inline constexpr int64_t kNumClasses = 10;
inline constexpr int64_t kPrimaryDim = 8;
inline constexpr int64_t kDigitDim = 16;

enum class Architecture { PathCapsNet, CapsNetBaseline };

const char* architecture_name(Architecture a);

struct NetworkSpec {
  Architecture arch = Architecture::PathCapsNet;
  int paths = 5;
  PathVariant variant = PathVariant::Table2Matched;
  RoutingMode routing = RoutingMode::FanIn;
  int iterations = 3;
  DropCircuitConfig drop;
  bool reconstruction = false;
  uint64_t seed = 0;

  void validate() const;
};

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

struct ForwardOutput {
  Tensor digit_caps;      // [b, 10, 16]
  Tensor lengths;         // [b, 10]
  RoutingState routing;
  Tensor reconstruction;  // [b, 784]; undefined unless spec.reconstruction
};

struct ForwardOptions {
  bool training = false;
  const std::vector<int>* labels = nullptr;    // required when training with reconstruction
  Rng* mask_rng = nullptr;                     // required when training with DropCircuit
  const DropMasks* forced_masks = nullptr;     // overrides sampling (gradient checks, tests)
};

// All parameters in a fixed named order, drawn from the given stream:
// conv/dense kernels uniform +-1/sqrt(fan_in) with zero biases; routing
// transforms standard normal under fan-in and N(0, 0.2^2) under fan-out.
ParamStore init_params(const NetworkSpec& spec, Rng& rng);

ForwardOutput forward(const NetworkSpec& spec, const ParamStore& params, const Tensor& images,
                      const ForwardOptions& opts);

// Mean over the batch of the per-class hinge-squared loss on capsule lengths.
Tensor margin_loss(const Tensor& lengths, const std::vector<int>& labels);

// 0.0005 * mean over the batch of the summed squared pixel error.
Tensor reconstruction_loss(const Tensor& recon, const Tensor& images);

struct ParamCount {
  int64_t per_path = 0;      // PathCapsNet only
  int64_t conv_layers = 0;   // all paths, or the baseline conv stem
  int64_t routing_weights = 0;
  int64_t decoder = 0;
  int64_t total = 0;
};

// Closed-form count; matches the scalars init_params allocates exactly.
ParamCount count_parameters(const NetworkSpec& spec);

struct PerturbationGrid {
  Tensor input;             // [784]
  Tensor unperturbed;       // [784]
  int digit = 0;
  std::vector<int> dims;
  std::vector<double> values;
  std::vector<Tensor> cells;  // dims.size() x values.size(), row-major
};

// Sweeps coordinates of the selected output capsule and decodes each variant.
// digit < 0 selects the argmax-length capsule.
PerturbationGrid perturb_digitcaps(const NetworkSpec& spec, const ParamStore& params,
                                   const Tensor& image, int digit,
                                   const std::vector<int>& dims, double lo, double hi,
                                   double step);

}  // namespace pathcaps
