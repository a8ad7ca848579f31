#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>

namespace miaudit {

// Counter-based 64-bit generator. Output i of stream (seed, index) is
//   mix64(mix64(key + i·φ) ^ key_hi)
// where key and key_hi are SplitMix64 finalizations of (seed, index) and φ is
// the 64-bit golden-ratio constant. Identical (seed, index) pairs always
// produce identical sequences on every platform.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_index() const noexcept { return stream_index_; }
  std::uint64_t position() const noexcept { return counter_; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  // Standard normal via Box–Muller; the paired value is cached.
  double normal();
  // Uniform integer in [0, n) by rejection, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_index_;
  std::uint64_t key_;
  std::uint64_t key_hi_;
  std::uint64_t counter_ = 0;
  std::optional<double> cached_normal_;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

// Derive an independent master seed for a named sub-computation so that
// e.g. the MMD and C2ST permutation streams never coincide.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

}  // namespace miaudit
