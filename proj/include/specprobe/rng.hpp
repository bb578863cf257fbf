#pragma once

// Deterministic random streams. std::mt19937_64 is portable but the standard
// distributions are not (their algorithms are implementation-defined), so the
// uniform and normal transforms here are spelled out explicitly. Same seed,
// same platform or not: same bytes.

#include <cmath>
#include <cstdint>

namespace specprobe {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256++ seeded through splitmix64, the seeding scheme its authors
// recommend. State is never all-zero because splitmix64 output mixes fully.
class rng_stream {
 public:
  explicit rng_stream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1): top 53 bits scaled by 2^-53.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one pair of uniforms per two normals, spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates order for `n` indices, written into out[0..n).
  template <typename IndexVec>
  void shuffle_indices(IndexVec& out) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = next_u64() % i;  // modulo bias < 2^-50 for n < 2^14
      std::swap(out[i - 1], out[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Sub-seed for stream `index` under a run seed. Documented derivation:
// seed + (index+1) * golden-gamma, then one splitmix64 scramble.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  return splitmix64_next(z);
}

inline rng_stream derive_stream(std::uint64_t seed, std::uint64_t index) {
  return rng_stream(derive_seed(seed, index));
}

}  // namespace specprobe
