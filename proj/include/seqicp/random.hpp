#pragma once

// Counter-based random numbers.
//
// Every random draw in the library comes from Philox4x64-10 (Salmon et al.,
// Random123). A stream is identified by a 128-bit key and the upper three
// words of the 256-bit counter, so independent tasks (subsets, resamples,
// replications) get disjoint streams without sharing any state. Results are
// therefore identical for serial and parallel execution.
//
// Normals use the Box-Muller transform; both outputs of a pair are used.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace seqicp {

class Philox4x64 {
 public:
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  static constexpr Counter encrypt(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const unsigned __int128 p0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
      const unsigned __int128 p1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
      const auto lo0 = static_cast<std::uint64_t>(p0);
      const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
      const auto lo1 = static_cast<std::uint64_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;
};

/// Identifies one independent random stream.
struct StreamId {
  std::uint64_t seed = 0;
  std::uint64_t domain = 0;  // what the stream is used for
  std::uint64_t a = 0;       // e.g. subset mask or replication index
  std::uint64_t b = 0;       // e.g. resample index
};

// Domain tags. Only their distinctness matters.
namespace stream_domain {
inline constexpr std::uint64_t kResample = 1;
inline constexpr std::uint64_t kResampleCoef = 2;
inline constexpr std::uint64_t kResampleVar = 3;
inline constexpr std::uint64_t kSimulation = 10;
inline constexpr std::uint64_t kSimulationAux = 11;
inline constexpr std::uint64_t kReplicationSeed = 20;
}  // namespace stream_domain

class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(StreamId id) : id_(id) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    if (pos_ == 4) {
      buffer_ = Philox4x64::encrypt({block_++, id_.a, id_.b, 0}, {id_.seed, id_.domain});
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive), unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo);
    if (range == max()) return static_cast<std::int64_t>((*this)());
    const std::uint64_t span = range + 1;
    const std::uint64_t limit = max() - (max() % span);
    std::uint64_t draw;
    do {
      draw = (*this)();
    } while (draw >= limit);
    return lo + static_cast<std::int64_t>(draw % span);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // (0, 1] so the logarithm stays finite
    const double u1 = static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  StreamId id_;
  std::uint64_t block_ = 0;
  Philox4x64::Counter buffer_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Derives a child seed, e.g. one per replication of an experiment.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
  return Philox4x64::encrypt({index, tag, 0, 0}, {seed, stream_domain::kReplicationSeed})[0];
}

}  // namespace seqicp
