#include "doctest.h"

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "pathcaps/data.hpp"
#include "pathcaps/errors.hpp"
#include "testutil.hpp"

using namespace pathcaps;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pathcaps-data-test-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("idx round-trip: synthetic fixture loads back bitwise") {
  TempDir tmp;
  std::vector<uint8_t> pixels(3 * 28 * 28);
  Rng rng(1);
  for (auto& b : pixels) b = static_cast<uint8_t>(rng.uniform_int(256));
  std::vector<uint8_t> labels = {0, 9, 4};
  write_idx_images(tmp.file("img"), 3, 28, 28, pixels);
  write_idx_labels(tmp.file("lab"), labels);

  Tensor images = load_idx_images(tmp.file("img"));
  CHECK(images.shape() == Shape{3, 1, 28, 28});
  for (size_t i = 0; i < pixels.size(); ++i)
    CHECK(images.values()[i] == pixels[i] / 255.0);

  std::vector<int> got = load_idx_labels(tmp.file("lab"));
  CHECK(got == std::vector<int>{0, 9, 4});
}

TEST_CASE("idx: all-255 single image loads as all ones") {
  TempDir tmp;
  write_idx_images(tmp.file("img"), 1, 28, 28, std::vector<uint8_t>(784, 255));
  Tensor images = load_idx_images(tmp.file("img"));
  for (double v : images.values()) CHECK(v == 1.0);
}

TEST_CASE("idx: wrong magic, truncation and bad labels are rejected") {
  TempDir tmp;
  write_idx_labels(tmp.file("lab"), {1, 2});
  // a label file handed to the image loader has magic 0x801
  CHECK_THROWS_AS(load_idx_images(tmp.file("lab")), FormatError);
  write_idx_images(tmp.file("img"), 1, 28, 28, std::vector<uint8_t>(784, 0));
  CHECK_THROWS_AS(load_idx_labels(tmp.file("img")), FormatError);

  SUBCASE("truncated payload") {
    std::ofstream out(tmp.file("trunc"), std::ios::binary);
    std::ifstream in(tmp.file("img"), std::ios::binary);
    std::vector<char> head(500);
    in.read(head.data(), 500);
    out.write(head.data(), 500);
    out.close();
    CHECK_THROWS_AS(load_idx_images(tmp.file("trunc")), FormatError);
  }
  SUBCASE("label byte 10") {
    std::vector<uint8_t> raw = {0, 10, 3};
    std::ofstream out(tmp.file("badlab"), std::ios::binary);
    uint8_t header[8] = {0, 0, 8, 1, 0, 0, 0, 3};
    out.write(reinterpret_cast<char*>(header), 8);
    out.write(reinterpret_cast<char*>(raw.data()), 3);
    out.close();
    CHECK_THROWS_AS(load_idx_labels(tmp.file("badlab")), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_idx_images(tmp.file("nope")), FormatError); }
  SUBCASE("wrong image dims") {
    write_idx_images(tmp.file("small"), 2, 14, 14, std::vector<uint8_t>(2 * 196, 0));
    CHECK_THROWS_AS(load_idx_images(tmp.file("small")), FormatError);
  }
}

TEST_CASE("bundled fixture subset loads and is digit-interleaved") {
  const char* dir = std::getenv("PATHCAPS_TEST_DATA");
  if (!dir) return;  // exercised through the acceptance suite otherwise
  Dataset d = load_dataset(std::string(dir) + "/train-images-idx3-ubyte",
                           std::string(dir) + "/train-labels-idx1-ubyte");
  CHECK(d.size() == 2000);
  for (int i = 0; i < 20; ++i) CHECK(d.labels[static_cast<size_t>(i)] == i % 10);
  CHECK_FALSE(d.images_digest.empty());
}

TEST_CASE("split: deterministic, disjoint, exhaustive, 90/10") {
  TempDir tmp;
  std::vector<uint8_t> pixels(50 * 784);
  Rng rng(7);
  for (auto& b : pixels) b = static_cast<uint8_t>(rng.uniform_int(256));
  std::vector<uint8_t> labels(50);
  for (size_t i = 0; i < 50; ++i) labels[i] = static_cast<uint8_t>(i % 10);
  write_idx_images(tmp.file("img"), 50, 28, 28, pixels);
  write_idx_labels(tmp.file("lab"), labels);
  Dataset d = load_dataset(tmp.file("img"), tmp.file("lab"));

  SplitConfig cfg;
  cfg.split_seed = 11;
  auto [train, val] = split(d, cfg);
  CHECK(train.size() == 45);
  CHECK(val.size() == 5);

  auto [train2, val2] = split(d, cfg);
  CHECK(train.images.values() == train2.images.values());
  CHECK(val.labels == val2.labels);

  // disjoint and exhaustive over images (pixels are unique w.h.p.)
  auto rows_of = [](std::multiset<std::vector<double>>& into, const Dataset& ds) {
    for (int64_t i = 0; i < ds.size(); ++i)
      into.insert(std::vector<double>(ds.images.values().begin() + i * 784,
                                      ds.images.values().begin() + (i + 1) * 784));
  };
  std::multiset<std::vector<double>> combined, source;
  rows_of(combined, train);
  rows_of(combined, val);
  rows_of(source, d);
  CHECK(combined == source);
}

TEST_CASE("split sizes follow the 10 percent rule") {
  SplitConfig cfg;
  auto sizes = [&](int64_t n) {
    int64_t n_val = static_cast<int64_t>(n * cfg.val_fraction);
    return std::pair<int64_t, int64_t>(n - n_val, n_val);
  };
  CHECK(sizes(60000) == std::pair<int64_t, int64_t>(54000, 6000));
  CHECK(sizes(1000) == std::pair<int64_t, int64_t>(900, 100));
}

TEST_CASE("augment: centered crop is the identity, corner crop shifts down-right") {
  Tensor img(Shape{1, 28, 28});
  Rng fill(3);
  for (double& v : img.values()) v = fill.uniform01();

  // exhaust rng draws until we hit the wanted offsets; simpler: drive augment
  // with crafted streams by scanning seeds.
  auto augment_with_offsets = [&](int64_t want_dy, int64_t want_dx) {
    for (uint64_t seed = 0; seed < 4096; ++seed) {
      Rng probe(seed);
      if (probe.uniform_int(5) == want_dy && probe.uniform_int(5) == want_dx) {
        Rng use(seed);
        return augment(img, use);
      }
    }
    FAIL("no seed found for offsets");
    return Tensor();
  };

  Tensor centered = augment_with_offsets(2, 2);
  CHECK(centered.values() == img.values());

  Tensor corner = augment_with_offsets(0, 0);
  for (int64_t y = 0; y < 28; ++y)
    for (int64_t x = 0; x < 28; ++x) {
      double want = (y >= 2 && x >= 2) ? img.values()[(y - 2) * 28 + (x - 2)] : 0.0;
      CHECK(corner.values()[y * 28 + x] == want);
    }

  SUBCASE("pixel mass is conserved when all ink stays inside") {
    Tensor inked(Shape{1, 28, 28});
    for (int64_t y = 10; y < 18; ++y)
      for (int64_t x = 10; x < 18; ++x) inked.values()[y * 28 + x] = 0.5;
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
      Tensor aug = augment(inked, rng);
      double mass = 0.0;
      for (double v : aug.values()) mass += v;
      CHECK(mass == doctest::Approx(0.5 * 64));
      for (double v : aug.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
}

TEST_CASE("batcher: sizes, coverage, determinism") {
  TempDir tmp;
  std::vector<uint8_t> pixels(10 * 784);
  for (size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<uint8_t>((i / 784) + 1);  // row-identifying values
  std::vector<uint8_t> labels = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  write_idx_images(tmp.file("img"), 10, 28, 28, pixels);
  write_idx_labels(tmp.file("lab"), labels);
  Dataset d = load_dataset(tmp.file("img"), tmp.file("lab"));

  Batcher batcher(d, 4, uint64_t{5});
  CHECK(batcher.batches_total() == 3);
  Batch batch;
  std::vector<int64_t> sizes;
  std::multiset<int> seen;
  while (batcher.next(batch)) {
    sizes.push_back(batch.images.dim(0));
    for (int lab : batch.labels) seen.insert(lab);
  }
  CHECK(sizes == std::vector<int64_t>{4, 4, 2});
  CHECK(seen == std::multiset<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});  // each index once

  // same seed, same order
  Batcher b1(d, 4, uint64_t{5});
  Batcher b2(d, 4, uint64_t{5});
  Batch x1, x2;
  while (b1.next(x1) && b2.next(x2)) {
    CHECK(x1.labels == x2.labels);
    CHECK(x1.images.values() == x2.images.values());
  }

  // sequential mode preserves dataset order
  Batcher seq(d, 4);
  seq.next(batch);
  CHECK(batch.labels == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("dataset take keeps a prefix") {
  TempDir tmp;
  write_idx_images(tmp.file("img"), 10, 28, 28, std::vector<uint8_t>(10 * 784, 3));
  write_idx_labels(tmp.file("lab"), {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  Dataset d = load_dataset(tmp.file("img"), tmp.file("lab"));
  Dataset firstfour = d.take(4);
  CHECK(firstfour.size() == 4);
  CHECK(firstfour.labels == std::vector<int>{0, 1, 2, 3});
  CHECK(d.take(0).size() == 10);
  CHECK(d.take(99).size() == 10);
}

TEST_CASE("file digest is stable and content-sensitive") {
  TempDir tmp;
  write_idx_labels(tmp.file("a"), {1, 2, 3});
  write_idx_labels(tmp.file("b"), {1, 2, 3});
  write_idx_labels(tmp.file("c"), {1, 2, 4});
  CHECK(file_digest(tmp.file("a")) == file_digest(tmp.file("b")));
  CHECK(file_digest(tmp.file("a")) != file_digest(tmp.file("c")));
}
