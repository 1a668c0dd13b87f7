#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace hatsim {

// splitmix64 step; the generator every seeded subsystem is built on.
// Standard-library distributions are implementation-defined, so all
// sampling below is spelled out to keep runs bit-identical across
// platforms and compilers.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed derivation: root seed combined with an FNV-1a hash of a subsystem
// tag ("arrivals/3", "prompts/0", "corpus", ...). Adding a device or a
// stream never perturbs the draws of any other stream.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = root ^ h;
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) return 0;
    return next_u64() % n;  // modulo bias is irrelevant at simulation scale
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Exponential with the given rate (mean 1/rate).
  double exponential(double rate) {
    double u = next_double();
    return -std::log1p(-u) / rate;
  }

  // Box-Muller, one draw per call; the sine branch is discarded so the
  // stream position never depends on caller pairing.
  double normal(double mean, double stddev) {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    double z = std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    return mean + stddev * z;
  }

 private:
  std::uint64_t state_;
};

}  // namespace hatsim
