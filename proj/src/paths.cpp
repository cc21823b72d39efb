#include "pathcaps/paths.hpp"

#include <cmath>

#include "pathcaps/capsules.hpp"
#include "pathcaps/errors.hpp"
#include "pathcaps/ops.hpp"

namespace pathcaps {

const char* path_variant_name(PathVariant v) {
  return v == PathVariant::Table1Literal ? "table1" : "table2";
}

PathSpec default_path_spec(PathVariant variant) {
  PathSpec spec;
  spec.layers.push_back(LayerSpec::conv(9, 4, 1, 16));
  spec.layers.push_back(LayerSpec::conv(9, 4, 1, 16));
  spec.layers.push_back(LayerSpec::maxpool(2, 2));
  spec.layers.push_back(LayerSpec::conv(9, 4, 1, 16));
  if (variant == PathVariant::Table2Matched)
    spec.layers.push_back(LayerSpec::conv(9, 4, 1, 16));
  spec.layers.push_back(LayerSpec::conv(9, 4, 1, 8));
  spec.layers.push_back(LayerSpec::maxpool(2, 2));
  return spec;
}

int64_t path_param_count(const PathSpec& spec, int64_t in_channels) {
  int64_t total = 0;
  int64_t c = in_channels;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind != LayerSpec::Kind::Conv) continue;
    total += l.kernel * l.kernel * c * l.out_channels + l.out_channels;
    c = l.out_channels;
  }
  return total;
}

Shape path_output_shape(const PathSpec& spec, const Shape& input_chw) {
  if (input_chw.size() != 3) throw ShapeError("path_output_shape expects (c,h,w)");
  int64_t c = input_chw[0], h = input_chw[1], w = input_chw[2];
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerSpec::Kind::Conv) {
      h = (h + 2 * l.padding - l.kernel) / l.stride + 1;
      w = (w + 2 * l.padding - l.kernel) / l.stride + 1;
      c = l.out_channels;
    } else {
      h = (h - l.kernel) / l.stride + 1;
      w = (w - l.kernel) / l.stride + 1;
    }
    if (h < 1 || w < 1)
      throw ShapeError("path layer shrinks input below 1x1");
  }
  return Shape{c, h, w};
}

void init_path_params(const PathSpec& spec, int64_t in_channels, const std::string& prefix,
                      ParamStore& params, Rng& rng) {
  int64_t c = in_channels;
  int conv_idx = 0;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind != LayerSpec::Kind::Conv) continue;
    std::string base = prefix + ".conv" + std::to_string(conv_idx++);
    Tensor weight(Shape{l.out_channels, c, l.kernel, l.kernel});
    double bound = 1.0 / std::sqrt(static_cast<double>(c * l.kernel * l.kernel));
    for (double& v : weight.values()) v = rng.uniform(-bound, bound);
    params.add(base + ".weight", std::move(weight));
    params.add(base + ".bias", Tensor(Shape{l.out_channels}));
    c = l.out_channels;
  }
}

Tensor path_forward(const PathSpec& spec, const ParamStore& params, const std::string& prefix,
                    const Tensor& input) {
  require_rank(input, 4, "path_forward input");
  Tensor x = input;
  int conv_idx = 0;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind == LayerSpec::Kind::Conv) {
      std::string base = prefix + ".conv" + std::to_string(conv_idx++);
      x = ops::conv2d(x, params.at(base + ".weight"), params.at(base + ".bias"), l.padding,
                      l.stride);
      x = ops::relu(x);
    } else {
      x = ops::maxpool2d(x, l.kernel, l.stride);
    }
  }
  return x;
}

Tensor assemble_primary(const std::vector<Tensor>& paths_out) {
  if (paths_out.empty()) throw ContractError("assemble_primary: no paths");
  const Shape& first = paths_out[0].shape();
  std::vector<Tensor> units;
  units.reserve(paths_out.size());
  for (const Tensor& p : paths_out) {
    require_rank(p, 4, "assemble_primary path output");
    if (p.shape() != first)
      throw ShapeError("assemble_primary: path output " + shape_str(p.shape()) +
                       " differs from " + shape_str(first));
    units.push_back(ops::capsule_grid(p, p.dim(1)));  // whole channel vector per cell
  }
  return squash(ops::concat_units(units));
}

int PathMask::kept_count() const {
  int n = 0;
  for (uint8_t k : keep) n += k ? 1 : 0;
  return n;
}

PathMask sample_mask(int paths, const DropCircuitConfig& cfg, Rng& rng) {
  if (paths < 1) throw ContractError("sample_mask: need at least one path");
  if (cfg.drop_prob < 0.0 || cfg.drop_prob >= 1.0)
    throw ConfigError("drop_prob must lie in [0, 1)");
  PathMask mask;
  mask.stream_seed = rng.seed();
  mask.keep.assign(static_cast<size_t>(paths), 0);
  do {
    mask.draw_index = rng.draw_count();
    for (int p = 0; p < paths; ++p)
      mask.keep[static_cast<size_t>(p)] = rng.uniform01() >= cfg.drop_prob ? 1 : 0;
  } while (mask.kept_count() == 0);  // reject all-dropped draws
  return mask;
}

DropMasks sample_drop_masks(int paths, int64_t batch, const DropCircuitConfig& cfg, Rng& rng) {
  DropMasks out;
  out.per_sample = cfg.per_sample;
  if (cfg.per_sample) {
    out.masks.reserve(static_cast<size_t>(batch));
    for (int64_t b = 0; b < batch; ++b) out.masks.push_back(sample_mask(paths, cfg, rng));
  } else {
    out.masks.push_back(sample_mask(paths, cfg, rng));
  }
  return out;
}

std::vector<Tensor> apply_drop(const std::vector<Tensor>& paths_out, const DropMasks& masks,
                               bool training, const DropCircuitConfig& cfg) {
  if (!training || !cfg.enabled) return paths_out;
  const size_t n_paths = paths_out.size();
  for (const PathMask& m : masks.masks)
    if (m.keep.size() != n_paths)
      throw ContractError("apply_drop: mask covers " + std::to_string(m.keep.size()) +
                          " paths, model has " + std::to_string(n_paths));

  double inv_keep = 1.0 / (1.0 - cfg.drop_prob);
  std::vector<Tensor> out;
  out.reserve(n_paths);
  for (size_t p = 0; p < n_paths; ++p) {
    const Tensor& x = paths_out[p];
    int64_t batch = x.dim(0);
    std::vector<double> row_scales(static_cast<size_t>(batch));
    for (int64_t b = 0; b < batch; ++b) {
      const PathMask& m = masks.per_sample ? masks.masks[static_cast<size_t>(b)]
                                           : masks.masks[0];
      row_scales[static_cast<size_t>(b)] = m.keep[p] ? inv_keep : 0.0;
    }
    out.push_back(ops::scale_rows(x, row_scales));
  }
  return out;
}

}  // namespace pathcaps
