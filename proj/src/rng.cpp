#include "pathcaps/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "pathcaps/errors.hpp"

namespace pathcaps {

int64_t Rng::uniform_int(int64_t n) {
  if (n <= 0) throw ContractError("uniform_int requires n > 0");
  return static_cast<int64_t>(next_u64() % static_cast<uint64_t>(n));
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_ << " " << seed_ << " " << draws_ << " " << (has_spare_ ? 1 : 0);
  if (has_spare_) os << " " << std::hexfloat << spare_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  int spare_flag = 0;
  is >> engine_ >> seed_ >> draws_ >> spare_flag;
  if (!is) throw FormatError("rng state string is malformed");
  has_spare_ = spare_flag != 0;
  if (has_spare_) {
    is >> std::hexfloat >> spare_;
    if (!is) throw FormatError("rng state string is missing the cached normal");
  }
}

namespace {

constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr uint64_t kFnvPrime = 0x100000001b3ull;

uint64_t fnv_mix(uint64_t h, const void* bytes, size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

// splitmix64 finalizer, decorrelates nearby hashes
uint64_t avalanche(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t Rng::derive(uint64_t base, std::string_view stream) {
  uint64_t h = fnv_mix(kFnvOffset ^ base, stream.data(), stream.size());
  return avalanche(h);
}

uint64_t Rng::derive(uint64_t base, std::string_view stream, uint64_t index) {
  uint64_t h = fnv_mix(kFnvOffset ^ base, stream.data(), stream.size());
  h = fnv_mix(h, &index, sizeof(index));
  return avalanche(h);
}

}  // namespace pathcaps
