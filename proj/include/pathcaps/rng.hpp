#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace pathcaps {

// Deterministic random stream. All distribution transforms are implemented
// explicitly (std::mt19937_64 has a standard-specified output sequence, the
// std:: distribution adaptors do not), so a given seed produces the same
// values on every platform and standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed), seed_(seed) {}

  uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Modulo bias is ~2^-53 for the sizes used here.
  int64_t uniform_int(int64_t n);

  // Standard normal via Box-Muller; one spare value cached per pair.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  uint64_t seed() const { return seed_; }
  uint64_t draw_count() const { return draws_; }

  // Textual state round-trip (engine state, spare cache, counters).
  std::string state() const;
  void restore(const std::string& state);

  // Named sub-stream seeds: mixes the stream label (and optional index) into
  // the base seed so independent streams never collide.
  static uint64_t derive(uint64_t base, std::string_view stream);
  static uint64_t derive(uint64_t base, std::string_view stream, uint64_t index);

 private:
  std::mt19937_64 engine_;
  uint64_t seed_ = 0;
  uint64_t draws_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pathcaps
