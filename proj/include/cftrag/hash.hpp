#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

namespace cftrag {

inline constexpr std::uint64_t kHashSeed = 0x2545F4914F6CDD1DULL;

/// MurmurHash64A over the bytes of `key`. Stable across runs and platforms of
/// the same endianness, which the golden tests rely on.
inline std::uint64_t hash64(std::string_view key, std::uint64_t seed = kHashSeed) noexcept {
  constexpr std::uint64_t m = 0xc6a4a7935bd1e995ULL;
  constexpr int r = 47;

  const std::size_t len = key.size();
  std::uint64_t h = seed ^ (len * m);

  const char* data = key.data();
  const std::size_t nblocks = len / 8;
  for (std::size_t i = 0; i < nblocks; ++i) {
    std::uint64_t k;
    std::memcpy(&k, data + i * 8, sizeof(k));
    k *= m;
    k ^= k >> r;
    k *= m;
    h ^= k;
    h *= m;
  }

  const auto* tail = reinterpret_cast<const unsigned char*>(data + nblocks * 8);
  switch (len & 7) {
    case 7: h ^= std::uint64_t(tail[6]) << 48; [[fallthrough]];
    case 6: h ^= std::uint64_t(tail[5]) << 40; [[fallthrough]];
    case 5: h ^= std::uint64_t(tail[4]) << 32; [[fallthrough]];
    case 4: h ^= std::uint64_t(tail[3]) << 24; [[fallthrough]];
    case 3: h ^= std::uint64_t(tail[2]) << 16; [[fallthrough]];
    case 2: h ^= std::uint64_t(tail[1]) << 8; [[fallthrough]];
    case 1:
      h ^= std::uint64_t(tail[0]);
      h *= m;
  }

  h ^= h >> r;
  h *= m;
  h ^= h >> r;
  return h;
}

/// 64-bit finalizer (splitmix64). Used to hash small integers such as fingerprints.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace cftrag
