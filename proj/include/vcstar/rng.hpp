#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace vcstar {

// xoshiro256++ with splitmix64 seeding. Hand-rolled so the full state
// (including the cached Box-Muller draw) serializes exactly; checkpoint
// resume has to reproduce the remaining stream bit for bit.
class rng {
 public:
  rng() : rng(0) {}

  explicit rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
    has_cached_normal_ = false;
    cached_normal_ = 0.0;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; second draw cached in serialized state.
  double normal() {
    if (has_cached_normal_) {
      has_cached_normal_ = false;
      return cached_normal_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  struct snapshot {
    std::array<std::uint64_t, 4> state;
    bool has_cached_normal;
    double cached_normal;
  };

  snapshot save() const { return {state_, has_cached_normal_, cached_normal_}; }

  void restore(const snapshot& s) {
    state_ = s.state;
    has_cached_normal_ = s.has_cached_normal;
    cached_normal_ = s.cached_normal;
  }

  // Deterministic derived stream; tag keeps independent purposes decorrelated.
  static rng derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    std::uint64_t x = seed;
    std::uint64_t a = splitmix64(x);
    x ^= 0x9e3779b97f4a7c15ull * (tag + 1);
    std::uint64_t b = splitmix64(x);
    x ^= 0xbf58476d1ce4e5b9ull * (index + 1);
    std::uint64_t c = splitmix64(x);
    rng r;
    r.state_ = {a, b, c, splitmix64(x)};
    r.next_u64();  // decouple from raw seed words
    return r;
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace vcstar
