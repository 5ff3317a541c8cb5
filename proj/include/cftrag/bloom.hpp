#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "cftrag/hash.hpp"

namespace cftrag {

/// Classic Bloom filter with k probes derived by double hashing from one
/// 64-bit hash, so a caller can hash a key once and probe many filters.
class BloomFilter {
 public:
  BloomFilter() = default;

  BloomFilter(std::size_t bits, unsigned k) : k_(k) {
    if (bits == 0 || k == 0) throw std::invalid_argument("bloom filter needs bits >= 1 and k >= 1");
    words_.assign((bits + 63) / 64, 0);
  }

  void insert(std::uint64_t h) noexcept {
    const auto m = bit_count();
    auto [a, b] = split(h);
    for (unsigned i = 0; i < k_; ++i) {
      const auto bit = (a + i * b) % m;
      words_[bit >> 6] |= std::uint64_t{1} << (bit & 63);
    }
    ++inserted_;
  }

  bool query(std::uint64_t h) const noexcept {
    const auto m = bit_count();
    auto [a, b] = split(h);
    for (unsigned i = 0; i < k_; ++i) {
      const auto bit = (a + i * b) % m;
      if (!(words_[bit >> 6] & (std::uint64_t{1} << (bit & 63)))) return false;
    }
    return true;
  }

  void insert(std::string_view key) noexcept { insert(hash64(key)); }
  bool query(std::string_view key) const noexcept { return query(hash64(key)); }

  std::size_t bit_count() const noexcept { return words_.size() * 64; }
  unsigned hash_count() const noexcept { return k_; }
  std::size_t inserted() const noexcept { return inserted_; }

  std::size_t popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

 private:
  static std::pair<std::uint64_t, std::uint64_t> split(std::uint64_t h) noexcept {
    return {h & 0xffffffffULL, (h >> 32) | 1};
  }

  std::vector<std::uint64_t> words_;
  unsigned k_ = 0;
  std::size_t inserted_ = 0;
};

}  // namespace cftrag
