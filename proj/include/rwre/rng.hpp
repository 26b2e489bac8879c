#pragma once

// Counter-based random streams (Philox4x64-10).
//
// A stream is addressed by a 128-bit key derived from a master seed and a
// path of integer tags (experiment id, replica id, site block, ...). The
// output of a stream depends only on its key and on how many values were
// drawn from it, never on thread scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace rwre {

namespace detail {

inline std::uint64_t mulhilo64(std::uint64_t a, std::uint64_t b, std::uint64_t& hi) {
  const unsigned __int128 p = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(p >> 64);
  return static_cast<std::uint64_t>(p);
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

// One Philox4x64 block with 10 rounds.
inline PhiloxCounter philox4x64(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    std::uint64_t hi0 = 0;
    std::uint64_t hi1 = 0;
    const std::uint64_t lo0 = detail::mulhilo64(kM0, ctr[0], hi0);
    const std::uint64_t lo1 = detail::mulhilo64(kM1, ctr[2], hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

// Stream key for (master_seed, tag_1, ..., tag_k). Distinct tag paths give
// unrelated keys.
inline PhiloxKey derive_key(std::uint64_t master_seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t a = detail::splitmix64(master_seed ^ 0x5EEDULL);
  std::uint64_t b = detail::splitmix64(a ^ 0xA5A5A5A5A5A5A5A5ULL);
  for (std::uint64_t t : tags) {
    a = detail::splitmix64(a ^ detail::splitmix64(t + 0x1234567ULL));
    b = detail::splitmix64(b + a);
  }
  return {a, b};
}

// UniformRandomBitGenerator over a single Philox stream. Usable with the
// <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(PhiloxKey key) : key_(key) {}
  CounterRng(std::uint64_t master_seed, std::initializer_list<std::uint64_t> tags)
      : key_(derive_key(master_seed, tags)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) {
      buffer_ = philox4x64({block_, 0, 0, 0}, key_);
      ++block_;
      pos_ = 0;
    }
    return buffer_[pos_++];
  }

  // Uniform on the open interval (0,1): 53 random bits centred in their cell.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential() { return -std::log(uniform()); }

  // Number of 64-bit values drawn so far.
  std::uint64_t draws() const { return block_ * 4 - static_cast<std::uint64_t>(4 - pos_); }

  const PhiloxKey& key() const { return key_; }

 private:
  PhiloxKey key_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int pos_ = 4;
};

}  // namespace rwre
