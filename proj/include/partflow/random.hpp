#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <type_traits>

namespace partflow {

// Splittable counter-keyed RNG: xoshiro256++ state seeded through SplitMix64
// from a (seed, stream_id) pair.  Identical pairs reproduce identical draw
// sequences bit-for-bit, and substream() derives independent child streams
// from the parent ids alone (never from the parent's draw position), so
// results are reproducible regardless of thread scheduling.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_(stream_id) {
    std::uint64_t z = mix(seed ^ kSeedSalt) ^ mix(stream_id ^ kStreamSalt);
    for (auto& s : state_) s = splitmix(z);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  // Child stream keyed by idx; stateless, so the derivation commutes with any
  // draws already made from this stream.
  RandomStream substream(std::uint64_t idx) const noexcept {
    return RandomStream(seed_, mix(stream_ ^ mix(idx ^ kChildSalt)));
  }

  std::uint64_t next_u64() noexcept {
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

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.  Always consumes exactly two uniforms and
  // never caches the second deviate, keeping draw counts predictable.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log1p(-u1));
    return radius * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr std::uint64_t kSeedSalt = 0x8f58a4c1d0e2b3f7ull;
  static constexpr std::uint64_t kStreamSalt = 0xd1b54a32d192ed03ull;
  static constexpr std::uint64_t kChildSalt = 0xa0761d6478bd642full;

  static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t splitmix(std::uint64_t& z) noexcept {
    z += 0x9e3779b97f4a7c15ull;
    std::uint64_t r = z;
    r = (r ^ (r >> 30)) * 0xbf58476d1ce4e5b9ull;
    r = (r ^ (r >> 27)) * 0x94d049bb133111ebull;
    return r ^ (r >> 31);
  }
  static std::uint64_t mix(std::uint64_t z) noexcept { return splitmix(z); }

  std::uint64_t state_[4];
  std::uint64_t seed_;
  std::uint64_t stream_;
};

// Anything that can hand out normal/uniform draws and spawn keyed child
// streams.  Estimators are templated on this so tests can inject scripted or
// zero-noise sources.
template <class R>
concept NoiseSource = requires(R r, std::uint64_t k) {
  { r.normal() } -> std::convertible_to<double>;
  { r.uniform() } -> std::convertible_to<double>;
  { r.substream(k) } -> std::convertible_to<std::remove_cvref_t<R>>;
};

static_assert(NoiseSource<RandomStream>);

}  // namespace partflow
