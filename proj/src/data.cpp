#include "pathcaps/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pathcaps/errors.hpp"

namespace pathcaps {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;
constexpr int64_t kSide = 28;

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return bytes;
}

uint32_t read_be32(const std::vector<uint8_t>& bytes, size_t offset, const char* field,
                   const std::string& path) {
  if (offset + 4 > bytes.size())
    throw FormatError("'" + path + "': truncated before " + field);
  return (uint32_t(bytes[offset]) << 24) | (uint32_t(bytes[offset + 1]) << 16) |
         (uint32_t(bytes[offset + 2]) << 8) | uint32_t(bytes[offset + 3]);
}

void write_be32(std::ofstream& out, uint32_t v) {
  uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace

std::string file_digest(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  uint64_t h = 0xcbf29ce484222325ull;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return hex64(h);
}

Tensor load_idx_images(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  uint32_t magic = read_be32(bytes, 0, "magic", path);
  if (magic != kImagesMagic) {
    std::ostringstream os;
    os << "'" << path << "': magic 0x" << std::hex << magic << " is not an image file (0x803)";
    throw FormatError(os.str());
  }
  int64_t n = read_be32(bytes, 4, "count", path);
  int64_t rows = read_be32(bytes, 8, "rows", path);
  int64_t cols = read_be32(bytes, 12, "cols", path);
  if (rows != kSide) throw FormatError("'" + path + "': rows = " + std::to_string(rows) + ", expected 28");
  if (cols != kSide) throw FormatError("'" + path + "': cols = " + std::to_string(cols) + ", expected 28");
  if (static_cast<int64_t>(bytes.size()) != 16 + n * rows * cols)
    throw FormatError("'" + path + "': payload holds " + std::to_string(bytes.size() - 16) +
                      " bytes for count " + std::to_string(n));

  Tensor out(Shape{n, 1, kSide, kSide});
  auto& v = out.values();
  for (int64_t i = 0; i < n * rows * cols; ++i)
    v[i] = bytes[static_cast<size_t>(16 + i)] / 255.0;
  return out;
}

std::vector<int> load_idx_labels(const std::string& path) {
  std::vector<uint8_t> bytes = read_file(path);
  uint32_t magic = read_be32(bytes, 0, "magic", path);
  if (magic != kLabelsMagic) {
    std::ostringstream os;
    os << "'" << path << "': magic 0x" << std::hex << magic << " is not a label file (0x801)";
    throw FormatError(os.str());
  }
  int64_t n = read_be32(bytes, 4, "count", path);
  if (static_cast<int64_t>(bytes.size()) != 8 + n)
    throw FormatError("'" + path + "': payload holds " + std::to_string(bytes.size() - 8) +
                      " bytes for count " + std::to_string(n));
  std::vector<int> labels(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    uint8_t b = bytes[static_cast<size_t>(8 + i)];
    if (b > 9)
      throw FormatError("'" + path + "': label " + std::to_string(int(b)) + " at index " +
                        std::to_string(i) + " exceeds 9");
    labels[static_cast<size_t>(i)] = b;
  }
  return labels;
}

void write_idx_images(const std::string& path, int64_t n, int64_t rows, int64_t cols,
                      const std::vector<uint8_t>& pixels) {
  if (static_cast<int64_t>(pixels.size()) != n * rows * cols)
    throw ContractError("write_idx_images: pixel count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  write_be32(out, kImagesMagic);
  write_be32(out, static_cast<uint32_t>(n));
  write_be32(out, static_cast<uint32_t>(rows));
  write_be32(out, static_cast<uint32_t>(cols));
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  write_be32(out, kLabelsMagic);
  write_be32(out, static_cast<uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

Dataset load_dataset(const std::string& images_path, const std::string& labels_path) {
  Dataset d;
  d.images = load_idx_images(images_path);
  d.labels = load_idx_labels(labels_path);
  if (d.images.dim(0) != static_cast<int64_t>(d.labels.size()))
    throw FormatError("image count " + std::to_string(d.images.dim(0)) +
                      " does not match label count " + std::to_string(d.labels.size()));
  d.images_digest = file_digest(images_path);
  d.labels_digest = file_digest(labels_path);
  return d;
}

Dataset Dataset::take(int64_t n) const {
  if (n <= 0 || n >= size()) return *this;
  Dataset out;
  out.images = Tensor(Shape{n, 1, kSide, kSide});
  std::copy(images.values().begin(), images.values().begin() + n * kSide * kSide,
            out.images.values().begin());
  out.labels.assign(labels.begin(), labels.begin() + n);
  out.images_digest = images_digest;
  out.labels_digest = labels_digest;
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitConfig& cfg) {
  int64_t n = dataset.size();
  std::vector<int64_t> perm(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  Rng rng(cfg.split_seed);
  for (int64_t i = n - 1; i > 0; --i)  // Fisher-Yates on the seeded stream
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(rng.uniform_int(i + 1))]);

  int64_t n_val = static_cast<int64_t>(n * cfg.val_fraction);
  int64_t n_train = n - n_val;
  auto gather = [&](int64_t begin, int64_t count) {
    Dataset out;
    out.images = Tensor(Shape{count, 1, kSide, kSide});
    out.labels.resize(static_cast<size_t>(count));
    out.images_digest = dataset.images_digest;
    out.labels_digest = dataset.labels_digest;
    const auto& src = dataset.images.values();
    auto& dst = out.images.values();
    for (int64_t i = 0; i < count; ++i) {
      int64_t idx = perm[static_cast<size_t>(begin + i)];
      std::copy(src.begin() + idx * kSide * kSide, src.begin() + (idx + 1) * kSide * kSide,
                dst.begin() + i * kSide * kSide);
      out.labels[static_cast<size_t>(i)] = dataset.labels[static_cast<size_t>(idx)];
    }
    return out;
  };
  return {gather(0, n_train), gather(n_train, n_val)};
}

Tensor augment(const Tensor& image, Rng& rng) {
  Shape s = image.shape();
  int64_t h = s[s.size() - 2], w = s[s.size() - 1];
  if (h != kSide || w != kSide)
    throw ShapeError("augment expects a 28x28 image, got " + shape_str(s));
  int64_t dy = rng.uniform_int(5);
  int64_t dx = rng.uniform_int(5);

  Tensor out(s);
  const auto& src = image.values();
  auto& dst = out.values();
  // Crop offset (dy,dx) into the zero-padded 32x32 frame: output (y,x) reads
  // source (y + dy - 2, x + dx - 2).
  for (int64_t y = 0; y < kSide; ++y) {
    int64_t sy = y + dy - 2;
    if (sy < 0 || sy >= kSide) continue;
    for (int64_t x = 0; x < kSide; ++x) {
      int64_t sx = x + dx - 2;
      if (sx < 0 || sx >= kSide) continue;
      dst[y * kSide + x] = src[sy * kSide + sx];
    }
  }
  return out;
}

Batcher::Batcher(const Dataset& dataset, int64_t batch_size,
                 std::optional<uint64_t> shuffle_seed)
    : dataset_(dataset), batch_size_(batch_size) {
  if (batch_size_ < 1) throw ContractError("batch_size must be >= 1");
  int64_t n = dataset.size();
  order_.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order_[static_cast<size_t>(i)] = i;
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    for (int64_t i = n - 1; i > 0; --i)
      std::swap(order_[static_cast<size_t>(i)],
                order_[static_cast<size_t>(rng.uniform_int(i + 1))]);
  }
}

int64_t Batcher::batches_total() const {
  int64_t n = static_cast<int64_t>(order_.size());
  return (n + batch_size_ - 1) / batch_size_;
}

bool Batcher::next(Batch& out, Rng* augment_rng) {
  int64_t n = static_cast<int64_t>(order_.size());
  if (cursor_ >= n) return false;
  int64_t count = std::min(batch_size_, n - cursor_);

  out.images = Tensor(Shape{count, 1, kSide, kSide});
  out.labels.resize(static_cast<size_t>(count));
  const auto& src = dataset_.images.values();
  auto& dst = out.images.values();
  for (int64_t i = 0; i < count; ++i) {
    int64_t idx = order_[static_cast<size_t>(cursor_ + i)];
    out.labels[static_cast<size_t>(i)] = dataset_.labels[static_cast<size_t>(idx)];
    if (augment_rng) {
      Tensor img(Shape{1, kSide, kSide},
                 std::vector<double>(src.begin() + idx * kSide * kSide,
                                     src.begin() + (idx + 1) * kSide * kSide));
      Tensor aug = augment(img, *augment_rng);
      std::copy(aug.values().begin(), aug.values().end(), dst.begin() + i * kSide * kSide);
    } else {
      std::copy(src.begin() + idx * kSide * kSide, src.begin() + (idx + 1) * kSide * kSide,
                dst.begin() + i * kSide * kSide);
    }
  }
  cursor_ += count;
  return true;
}

}  // namespace pathcaps
