#include "pathcaps/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <nlohmann/json.hpp>

#include "pathcaps/errors.hpp"
#include "pathcaps/ops.hpp"

namespace pathcaps {

namespace {

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

constexpr double kMarginHigh = 0.9;
constexpr double kMarginLow = 0.1;
constexpr double kMarginLambda = 0.5;
constexpr double kReconScale = 0.0005;
constexpr int64_t kImageSide = 28;
constexpr int64_t kDecoderHidden1 = 512;
constexpr int64_t kDecoderHidden2 = 1024;
constexpr int64_t kImagePixels = kImageSide * kImageSide;

// Baseline stem/primary conv geometry.
constexpr int64_t kBaselineStemChannels = 256;
constexpr int64_t kBaselinePrimaryChannels = 256;  // 32 capsule groups x 8 dims
constexpr int64_t kBaselineKernel = 9;

std::vector<double>& grad_buf(const Impl& t) {
  if (t->grad.empty()) t->grad.assign(t->value.size(), 0.0);
  return t->grad;
}

void init_uniform_fanin(Tensor& t, int64_t fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

int64_t primary_unit_count(const NetworkSpec& spec) {
  if (spec.arch == Architecture::PathCapsNet) return 49 * static_cast<int64_t>(spec.paths);
  return 32 * 6 * 6;  // baseline: 32 capsule groups on a 6x6 grid
}

void init_decoder(ParamStore& params, Rng& rng) {
  int64_t in = kNumClasses * kDigitDim;
  Tensor w1(Shape{kDecoderHidden1, in});
  init_uniform_fanin(w1, in, rng);
  params.add("decoder.fc1.weight", std::move(w1));
  params.add("decoder.fc1.bias", Tensor(Shape{kDecoderHidden1}));
  Tensor w2(Shape{kDecoderHidden2, kDecoderHidden1});
  init_uniform_fanin(w2, kDecoderHidden1, rng);
  params.add("decoder.fc2.weight", std::move(w2));
  params.add("decoder.fc2.bias", Tensor(Shape{kDecoderHidden2}));
  Tensor w3(Shape{kImagePixels, kDecoderHidden2});
  init_uniform_fanin(w3, kDecoderHidden2, rng);
  params.add("decoder.fc3.weight", std::move(w3));
  params.add("decoder.fc3.bias", Tensor(Shape{kImagePixels}));
}

Tensor decode_masked(const ParamStore& params, const Tensor& masked) {
  Tensor h = ops::relu(
      ops::dense(masked, params.at("decoder.fc1.weight"), params.at("decoder.fc1.bias")));
  h = ops::relu(ops::dense(h, params.at("decoder.fc2.weight"), params.at("decoder.fc2.bias")));
  return ops::sigmoid(
      ops::dense(h, params.at("decoder.fc3.weight"), params.at("decoder.fc3.bias")));
}

std::vector<int64_t> argmax_rows(const Tensor& lengths) {
  int64_t b = lengths.dim(0), k = lengths.dim(1);
  std::vector<int64_t> out(static_cast<size_t>(b), 0);
  const auto& v = lengths.values();
  for (int64_t r = 0; r < b; ++r) {
    int64_t best = 0;
    for (int64_t j = 1; j < k; ++j)
      if (v[r * k + j] > v[r * k + best]) best = j;
    out[static_cast<size_t>(r)] = best;
  }
  return out;
}

}  // namespace

const char* architecture_name(Architecture a) {
  return a == Architecture::PathCapsNet ? "pathcaps" : "capsnet";
}

void NetworkSpec::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (arch == Architecture::PathCapsNet && paths < 1)
    throw ConfigError("paths must be >= 1");
  if (drop.drop_prob < 0.0 || drop.drop_prob >= 1.0)
    throw ConfigError("drop_prob must lie in [0, 1)");
  if (arch == Architecture::CapsNetBaseline && drop.enabled)
    throw ConfigError("drop_circuit applies only to the pathcaps architecture");
}

nlohmann::json spec_to_json(const NetworkSpec& spec) {
  nlohmann::json j;
  j["architecture"] = architecture_name(spec.arch);
  j["paths"] = spec.paths;
  j["variant"] = path_variant_name(spec.variant);
  j["routing"] = routing_mode_name(spec.routing);
  j["iterations"] = spec.iterations;
  j["drop_circuit"] = {{"enabled", spec.drop.enabled},
                       {"prob", spec.drop.drop_prob},
                       {"per_sample", spec.drop.per_sample}};
  j["reconstruction"] = spec.reconstruction;
  j["seed"] = spec.seed;
  return j;
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
  NetworkSpec spec;
  std::string arch = j.at("architecture").get<std::string>();
  if (arch == "pathcaps")
    spec.arch = Architecture::PathCapsNet;
  else if (arch == "capsnet")
    spec.arch = Architecture::CapsNetBaseline;
  else
    throw ConfigError("unknown architecture '" + arch + "' (expected pathcaps|capsnet)");

  spec.paths = j.at("paths").get<int>();
  std::string variant = j.at("variant").get<std::string>();
  if (variant == "table1")
    spec.variant = PathVariant::Table1Literal;
  else if (variant == "table2")
    spec.variant = PathVariant::Table2Matched;
  else
    throw ConfigError("unknown variant '" + variant + "' (expected table1|table2)");

  std::string routing = j.at("routing").get<std::string>();
  if (routing == "fan-out")
    spec.routing = RoutingMode::FanOut;
  else if (routing == "fan-in")
    spec.routing = RoutingMode::FanIn;
  else
    throw ConfigError("unknown routing '" + routing + "' (expected fan-in|fan-out)");

  spec.iterations = j.at("iterations").get<int>();
  const auto& d = j.at("drop_circuit");
  spec.drop.enabled = d.at("enabled").get<bool>();
  spec.drop.drop_prob = d.at("prob").get<double>();
  spec.drop.per_sample = d.value("per_sample", false);
  spec.reconstruction = j.at("reconstruction").get<bool>();
  spec.seed = j.at("seed").get<uint64_t>();
  spec.validate();
  return spec;
}

ParamStore init_params(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  ParamStore params;

  if (spec.arch == Architecture::PathCapsNet) {
    PathSpec pspec = default_path_spec(spec.variant);
    for (int p = 0; p < spec.paths; ++p)
      init_path_params(pspec, 1, "path" + std::to_string(p), params, rng);
  } else {
    Tensor stem_w(Shape{kBaselineStemChannels, 1, kBaselineKernel, kBaselineKernel});
    init_uniform_fanin(stem_w, kBaselineKernel * kBaselineKernel, rng);
    params.add("stem.conv.weight", std::move(stem_w));
    params.add("stem.conv.bias", Tensor(Shape{kBaselineStemChannels}));
    Tensor prim_w(Shape{kBaselinePrimaryChannels, kBaselineStemChannels, kBaselineKernel,
                        kBaselineKernel});
    init_uniform_fanin(prim_w, kBaselineStemChannels * kBaselineKernel * kBaselineKernel, rng);
    params.add("primary.conv.weight", std::move(prim_w));
    params.add("primary.conv.bias", Tensor(Shape{kBaselinePrimaryChannels}));
  }

  Tensor w(Shape{primary_unit_count(spec), kNumClasses, kDigitDim, kPrimaryDim});
  if (spec.routing == RoutingMode::FanIn) {
    for (double& v : w.values()) v = rng.normal();
  } else {
    // Smaller scale keeps the fan-out softmax away from early saturation.
    for (double& v : w.values()) v = rng.normal(0.0, 0.2);
  }
  params.add("routing.W", std::move(w));

  if (spec.reconstruction) init_decoder(params, rng);
  return params;
}

ForwardOutput forward(const NetworkSpec& spec, const ParamStore& params, const Tensor& images,
                      const ForwardOptions& opts) {
  require_rank(images, 4, "forward images");
  if (images.dim(1) != 1 || images.dim(2) != kImageSide || images.dim(3) != kImageSide)
    throw ShapeError("forward: expected [b,1,28,28] images, got " + shape_str(images.shape()));
  int64_t batch = images.dim(0);

  Tensor primary;
  if (spec.arch == Architecture::PathCapsNet) {
    PathSpec pspec = default_path_spec(spec.variant);
    std::vector<Tensor> paths_out;
    paths_out.reserve(static_cast<size_t>(spec.paths));
    for (int p = 0; p < spec.paths; ++p)
      paths_out.push_back(path_forward(pspec, params, "path" + std::to_string(p), images));

    if (opts.training && spec.drop.enabled) {
      DropMasks masks;
      if (opts.forced_masks) {
        masks = *opts.forced_masks;
      } else {
        if (!opts.mask_rng)
          throw ContractError("forward: DropCircuit training requires a mask rng");
        masks = sample_drop_masks(spec.paths, batch, spec.drop, *opts.mask_rng);
      }
      paths_out = apply_drop(paths_out, masks, true, spec.drop);
    }
    primary = assemble_primary(paths_out);
  } else {
    Tensor x = ops::relu(ops::conv2d(images, params.at("stem.conv.weight"),
                                     params.at("stem.conv.bias"), 0, 1));
    x = ops::conv2d(x, params.at("primary.conv.weight"), params.at("primary.conv.bias"), 0, 2);
    primary = squash(ops::capsule_grid(x, kPrimaryDim));
  }

  Tensor uhat = predict(primary, params.at("routing.W"));
  RouteResult routed = route(uhat, spec.routing, spec.iterations);

  ForwardOutput out;
  out.digit_caps = routed.output;
  out.lengths = capsule_lengths(routed.output);
  out.routing = std::move(routed.state);

  if (spec.reconstruction) {
    std::vector<int64_t> selected;
    if (opts.training) {
      if (!opts.labels)
        throw ContractError("forward: reconstruction training requires labels");
      selected.reserve(opts.labels->size());
      for (int lab : *opts.labels) selected.push_back(lab);
    } else {
      selected = argmax_rows(out.lengths);
    }
    Tensor masked = ops::select_capsule_mask(out.digit_caps, selected);
    out.reconstruction = decode_masked(params, masked);
  }
  return out;
}

Tensor margin_loss(const Tensor& lengths, const std::vector<int>& labels) {
  require_rank(lengths, 2, "margin_loss lengths");
  int64_t b = lengths.dim(0), k = lengths.dim(1);
  if (static_cast<int64_t>(labels.size()) != b)
    throw ContractError("margin_loss: " + std::to_string(labels.size()) +
                        " labels for batch " + std::to_string(b));
  for (int lab : labels)
    if (lab < 0 || lab >= k)
      throw ContractError("margin_loss: label " + std::to_string(lab) + " out of range [0," +
                          std::to_string(k) + ")");

  const auto& L = lengths.values();
  double total = 0.0;
  for (int64_t r = 0; r < b; ++r) {
    int target = labels[static_cast<size_t>(r)];
    for (int64_t j = 0; j < k; ++j) {
      double len = L[r * k + j];
      if (j == target) {
        double hinge = std::max(0.0, kMarginHigh - len);
        total += hinge * hinge;
      } else {
        double hinge = std::max(0.0, len - kMarginLow);
        total += kMarginLambda * hinge * hinge;
      }
    }
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(b));

  Graph* g = Graph::common_graph({&lengths});
  if (!g) return out;
  Impl li = share_impl(lengths), oi = share_impl(out);
  g->emit(out, [li, oi, labels, b, k] {
    if (li->node < 0) return;
    auto& gl = grad_buf(li);
    double go = oi->grad[0] / static_cast<double>(b);
    for (int64_t r = 0; r < b; ++r) {
      int target = labels[static_cast<size_t>(r)];
      for (int64_t j = 0; j < k; ++j) {
        double len = li->value[r * k + j];
        if (j == target) {
          gl[r * k + j] += go * -2.0 * std::max(0.0, kMarginHigh - len);
        } else {
          gl[r * k + j] += go * 2.0 * kMarginLambda * std::max(0.0, len - kMarginLow);
        }
      }
    }
  });
  return out;
}

Tensor reconstruction_loss(const Tensor& recon, const Tensor& images) {
  require_rank(recon, 2, "reconstruction_loss recon");
  int64_t b = recon.dim(0);
  Tensor flat = images;
  if (images.rank() == 4) flat = ops::reshape(images, Shape{images.dim(0), kImagePixels});
  require_same_shape(recon, flat, "reconstruction_loss");
  Tensor diff = ops::sub(recon, flat);
  Tensor sq = ops::mul(diff, diff);
  return ops::scale(ops::sum(sq), kReconScale / static_cast<double>(b));
}

ParamCount count_parameters(const NetworkSpec& spec) {
  ParamCount c;
  if (spec.arch == Architecture::PathCapsNet) {
    c.per_path = path_param_count(default_path_spec(spec.variant), 1);
    c.conv_layers = c.per_path * spec.paths;
  } else {
    int64_t stem = kBaselineKernel * kBaselineKernel * 1 * kBaselineStemChannels +
                   kBaselineStemChannels;
    int64_t prim = kBaselineKernel * kBaselineKernel * kBaselineStemChannels *
                       kBaselinePrimaryChannels +
                   kBaselinePrimaryChannels;
    c.conv_layers = stem + prim;
  }
  c.routing_weights = primary_unit_count(spec) * kNumClasses * kDigitDim * kPrimaryDim;
  if (spec.reconstruction) {
    int64_t in = kNumClasses * kDigitDim;
    c.decoder = in * kDecoderHidden1 + kDecoderHidden1 +
                kDecoderHidden1 * kDecoderHidden2 + kDecoderHidden2 +
                kDecoderHidden2 * kImagePixels + kImagePixels;
  }
  c.total = c.conv_layers + c.routing_weights + c.decoder;
  return c;
}

PerturbationGrid perturb_digitcaps(const NetworkSpec& spec, const ParamStore& params,
                                   const Tensor& image, int digit,
                                   const std::vector<int>& dims, double lo, double hi,
                                   double step) {
  if (!spec.reconstruction || !params.contains("decoder.fc1.weight"))
    throw ContractError("perturb_digitcaps requires a reconstruction decoder");
  if (digit >= static_cast<int>(kNumClasses))
    throw ContractError("perturb_digitcaps: digit out of range");
  for (int d : dims)
    if (d < 0 || d >= static_cast<int>(kDigitDim))
      throw ContractError("perturb_digitcaps: dimension " + std::to_string(d) +
                          " out of range [0,16)");

  Tensor img = image;
  if (img.rank() == 3) img = ops::reshape(img, Shape{1, img.dim(0), img.dim(1), img.dim(2)});
  require_rank(img, 4, "perturb_digitcaps image");
  if (img.dim(0) != 1)
    throw ContractError("perturb_digitcaps operates on a single image");

  ForwardOutput fwd = forward(spec, params, img, ForwardOptions{});
  int sel = digit >= 0 ? digit : static_cast<int>(argmax_rows(fwd.lengths)[0]);

  // Masked 160-vector: the selected capsule, zeros elsewhere.
  Tensor base(Shape{1, kNumClasses * kDigitDim});
  for (int64_t x = 0; x < kDigitDim; ++x)
    base.values()[sel * kDigitDim + x] = fwd.digit_caps.values()[(0 * kNumClasses + sel) * kDigitDim + x];

  PerturbationGrid grid;
  grid.digit = sel;
  grid.dims = dims;
  grid.input = ops::reshape(img, Shape{kImagePixels});
  grid.unperturbed = ops::reshape(decode_masked(params, base), Shape{kImagePixels});

  if (lo == hi) {
    grid.values = {lo};
  } else {
    if (step <= 0.0) throw ContractError("perturb_digitcaps: step must be positive");
    if (hi < lo) throw ContractError("perturb_digitcaps: hi must be >= lo");
    int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
    grid.values.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) grid.values.push_back(lo + step * i);
  }

  for (int d : dims) {
    for (double val : grid.values) {
      Tensor probe = base.detached_copy();
      probe.values()[sel * kDigitDim + d] = val;
      grid.cells.push_back(ops::reshape(decode_masked(params, probe), Shape{kImagePixels}));
    }
  }
  return grid;
}

}  // namespace pathcaps
