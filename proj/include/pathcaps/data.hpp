#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pathcaps/rng.hpp"
#include "pathcaps/tensor.hpp"

namespace pathcaps {

// Images scaled to [0,1], one label in 0..9 per image, plus digests of the
// source files for provenance.
struct Dataset {
  Tensor images;  // [n, 1, 28, 28]
  std::vector<int> labels;
  std::string images_digest;
  std::string labels_digest;

  int64_t size() const { return static_cast<int64_t>(labels.size()); }
  Dataset take(int64_t n) const;  // prefix subset (0 or >= size keeps all)
};

// Big-endian IDX containers: images magic 0x00000803 with n x 28 x 28 unsigned
// bytes, labels magic 0x00000801 with n bytes each <= 9.
Tensor load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, int64_t n, int64_t rows, int64_t cols,
                      const std::vector<uint8_t>& pixels);
void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels);

Dataset load_dataset(const std::string& images_path, const std::string& labels_path);

// FNV-1a 64 digest of a file's bytes, hex-encoded.
std::string file_digest(const std::string& path);

struct SplitConfig {
  double val_fraction = 0.1;
  uint64_t split_seed = 0;
};

// Seeded permutation; first 90% train, last 10% validation.
std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitConfig& cfg);

// Zero-pad to 32x32, crop a random 28x28 patch (offsets uniform in {0..4}^2).
Tensor augment(const Tensor& image, Rng& rng);

struct Batch {
  Tensor images;  // [bs, 1, 28, 28]
  std::vector<int> labels;
};

// One epoch of seeded-shuffled minibatches; the final short batch is kept.
// Without a shuffle seed the dataset order is preserved (evaluation). With
// an augment rng, each sample is augmented as it is materialized.
class Batcher {
 public:
  Batcher(const Dataset& dataset, int64_t batch_size,
          std::optional<uint64_t> shuffle_seed = std::nullopt);
  bool next(Batch& out, Rng* augment_rng = nullptr);
  int64_t batches_total() const;

 private:
  const Dataset& dataset_;
  int64_t batch_size_;
  std::vector<int64_t> order_;
  int64_t cursor_ = 0;
};

}  // namespace pathcaps
