#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pathcaps/params.hpp"
#include "pathcaps/rng.hpp"
#include "pathcaps/tensor.hpp"

namespace pathcaps {

// The two shipped per-path layer stacks. Table2Matched adds one extra 16->16
// conv so each path has 73,944 parameters; Table1Literal is the plain
// six-row stack at 53,192.
enum class PathVariant { Table1Literal, Table2Matched };

const char* path_variant_name(PathVariant v);

struct LayerSpec {
  enum class Kind { Conv, Maxpool };
  Kind kind = Kind::Conv;
  int64_t kernel = 0;
  int64_t padding = 0;
  int64_t stride = 1;
  int64_t out_channels = 0;  // conv only

  static LayerSpec conv(int64_t kernel, int64_t padding, int64_t stride, int64_t out_channels) {
    return {Kind::Conv, kernel, padding, stride, out_channels};
  }
  static LayerSpec maxpool(int64_t kernel, int64_t stride) {
    return {Kind::Maxpool, kernel, 0, stride, 0};
  }
};

// Ordered layer list of one path; conv layers are followed by ReLU.
struct PathSpec {
  std::vector<LayerSpec> layers;
};

PathSpec default_path_spec(PathVariant variant);

// Trainable scalar count of one path (conv kernels + biases).
int64_t path_param_count(const PathSpec& spec, int64_t in_channels);

// Spatial/channel trace: output shape of the stack for input [c,h,w].
Shape path_output_shape(const PathSpec& spec, const Shape& input_chw);

// Parameter creation (uniform fan-in init for kernels, zero biases), names
// "<prefix>.conv<i>.weight" / ".bias" in layer order.
void init_path_params(const PathSpec& spec, int64_t in_channels, const std::string& prefix,
                      ParamStore& params, Rng& rng);

// Applies the stack to [b,c,28,28]-style input; uses whatever graph the
// parameters/input are registered on.
Tensor path_forward(const PathSpec& spec, const ParamStore& params, const std::string& prefix,
                    const Tensor& input);

// Concatenates per-path [b,8,7,7] blocks into squashed capsules
// [b, 49*P, 8]; units ordered path-major then row-major spatially.
Tensor assemble_primary(const std::vector<Tensor>& paths_out);

struct DropCircuitConfig {
  bool enabled = false;
  double drop_prob = 0.5;
  bool per_sample = false;  // experimental granularity; default one mask per minibatch
};

// Keep-flags for the paths of one minibatch (or one sample when per-sample
// masking is on). At least one flag is always true; all-dropped draws are
// rejected and resampled. stream_seed/draw_index record where in the rng
// stream the mask was sampled.
struct PathMask {
  std::vector<uint8_t> keep;
  uint64_t stream_seed = 0;
  uint64_t draw_index = 0;

  int kept_count() const;
};

PathMask sample_mask(int paths, const DropCircuitConfig& cfg, Rng& rng);

// One mask per minibatch, or one per sample under cfg.per_sample.
struct DropMasks {
  std::vector<PathMask> masks;  // size 1, or batch under per-sample masking
  bool per_sample = false;
};

DropMasks sample_drop_masks(int paths, int64_t batch, const DropCircuitConfig& cfg, Rng& rng);

// Training: dropped paths become exact zeros, kept paths are scaled by
// 1/(1-drop_prob). Evaluation: identity.
std::vector<Tensor> apply_drop(const std::vector<Tensor>& paths_out, const DropMasks& masks,
                               bool training, const DropCircuitConfig& cfg);

}  // namespace pathcaps
