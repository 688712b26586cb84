#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace fkp {

// Philox 2x64-10 counter-based generator. A block cipher over a 128-bit
// counter with a 64-bit key: any (key, counter) pair can be evaluated
// independently, which is what makes per-particle substreams reproducible
// regardless of scheduling.
struct Philox2x64 {
  static constexpr std::uint64_t kMult = 0xD2B74407B1CE6E93ULL;
  static constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;

  struct Block {
    std::uint64_t x0;
    std::uint64_t x1;
  };

  static Block encrypt(std::uint64_t key, std::uint64_t c0, std::uint64_t c1) {
    std::uint64_t x0 = c0;
    std::uint64_t x1 = c1;
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 prod =
          static_cast<unsigned __int128>(kMult) * x0;
      const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
      const std::uint64_t lo = static_cast<std::uint64_t>(prod);
      x0 = hi ^ key ^ x1;
      x1 = lo;
      key += kWeyl;
    }
    return {x0, x1};
  }
};

// Tags keeping consumers of randomness on disjoint substreams.
enum class StreamPurpose : std::uint64_t {
  kGeneric = 0,
  kParticles = 1,
  kEvalPoints = 2,
  kOracle = 3,
  kSeedDerive = 4,
};

// 64-bit key for a (seed, purpose) pair.
inline std::uint64_t derive_key(std::uint64_t seed, StreamPurpose purpose) {
  return Philox2x64::encrypt(seed, static_cast<std::uint64_t>(purpose),
                             0x243F6A8885A308D3ULL)
      .x0;
}

// Independent 64-bit seed for sub-run `index` (e.g. one replicate).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return Philox2x64::encrypt(
             derive_key(seed, StreamPurpose::kSeedDerive), index, 0)
      .x0;
}

// Sequential view over one Philox substream identified by (key, stream_id).
// Streams with distinct ids never overlap.
class RandomStream {
 public:
  RandomStream(std::uint64_t key, std::uint64_t stream_id)
      : key_(key), stream_(stream_id) {}

  RandomStream(std::uint64_t seed, StreamPurpose purpose,
               std::uint64_t stream_id)
      : RandomStream(derive_key(seed, purpose), stream_id) {}

  std::uint64_t next_u64() {
    if (have_u64_) {
      have_u64_ = false;
      return spare_u64_;
    }
    const auto block = Philox2x64::encrypt(key_, stream_, block_index_++);
    spare_u64_ = block.x1;
    have_u64_ = true;
    return block.x0;
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller (deterministic draw count).
  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_normal_ = radius * std::sin(angle);
    have_normal_ = true;
    return radius * std::cos(angle);
  }

  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
  }

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t block_index_ = 0;
  std::uint64_t spare_u64_ = 0;
  bool have_u64_ = false;
  double spare_normal_ = 0.0;
  bool have_normal_ = false;
};

}  // namespace fkp
