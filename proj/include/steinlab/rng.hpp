#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace steinlab {

/// Stream tags keep unrelated random-number consumers on disjoint Philox
/// keys even when they share the experiment seed and replicate index.
enum class RngStream : std::uint32_t {
  kChaosDraw = 1,
  kMehlerPrime = 2,
  kDictionary = 3,
  kGaussianZ = 4,
  kKernelInit = 5,
  kBmInnovations = 6,
  kNnWeights = 7,
  kGeneric = 8,
};

/// Counter-based Philox4x32-10 random generator.
///
/// A stream is addressed by (seed, stream tag, replicate); draws inside the
/// stream are indexed by a 64-bit counter.  Any replicate can therefore be
/// generated independently of thread scheduling, which is what makes the
/// Monte Carlo loops reproducible for a fixed seed at any thread count.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, RngStream stream, std::uint64_t replicate)
      : CounterRng(seed, static_cast<std::uint32_t>(stream), replicate) {}

  CounterRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t replicate) {
    key_[0] = static_cast<std::uint32_t>(seed) ^ (0x9E3779B9u * (stream + 1u));
    key_[1] = static_cast<std::uint32_t>(seed >> 32) ^ (0x85EBCA6Bu * (stream + 1u));
    base_[0] = static_cast<std::uint32_t>(replicate);
    base_[1] = static_cast<std::uint32_t>(replicate >> 32);
  }

  /// Uniform double in (0, 1), 53 usable bits.
  double uniform() {
    const std::uint64_t hi = next_word();
    const std::uint64_t lo = next_word();
    const std::uint64_t r = (hi << 32) | lo;
    return static_cast<double>(r >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925286766559 * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  std::vector<double> normals(std::size_t n) {
    std::vector<double> out(n);
    for (auto& x : out) x = normal();
    return out;
  }

 private:
  std::uint32_t next_word() {
    if (word_pos_ == 4) {
      block_ = philox_block(counter_);
      ++counter_;
      word_pos_ = 0;
    }
    return block_[word_pos_++];
  }

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
  }

  std::array<std::uint32_t, 4> philox_block(std::uint64_t ctr) const {
    std::array<std::uint32_t, 4> x = {static_cast<std::uint32_t>(ctr),
                                      static_cast<std::uint32_t>(ctr >> 32),
                                      base_[0], base_[1]};
    std::uint32_t k0 = key_[0];
    std::uint32_t k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, x[0], hi0, lo0);
      mulhilo(0xCD9E8D57u, x[2], hi1, lo1);
      x = {hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0};
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    return x;
  }

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 2> base_{};
  std::array<std::uint32_t, 4> block_{};
  std::uint64_t counter_ = 0;
  int word_pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace steinlab
