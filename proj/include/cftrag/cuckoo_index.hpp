#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cftrag/error.hpp"
#include "cftrag/forest.hpp"
#include "cftrag/hash.hpp"

namespace cftrag {

inline constexpr unsigned kFingerprintBits = 12;
inline constexpr std::uint16_t kFingerprintMask = (1u << kFingerprintBits) - 1;

/// 12-bit entity fingerprint. Zero marks an empty slot and is never produced.
struct Fingerprint {
  std::uint16_t value = 0;

  constexpr bool empty() const noexcept { return value == 0; }
  friend constexpr bool operator==(Fingerprint, Fingerprint) = default;
};

/// The fingerprint takes the top 12 bits of the label hash; bucket indices
/// take low bits, so the two are independent for any table below 2^52 buckets.
constexpr Fingerprint fingerprint_from_hash(std::uint64_t h) noexcept {
  auto v = static_cast<std::uint16_t>(h >> (64 - kFingerprintBits));
  return Fingerprint{v == 0 ? std::uint16_t{1} : v};
}

inline Fingerprint fingerprint(std::string_view label) noexcept { return fingerprint_from_hash(hash64(label)); }

/// Partner bucket under partial-key cuckoo hashing. Self-inverse for a
/// power-of-two bucket count.
constexpr std::size_t alternate_index(std::size_t index, Fingerprint fp, std::size_t bucket_count) noexcept {
  return (index ^ static_cast<std::size_t>(mix64(fp.value))) & (bucket_count - 1);
}

struct CandidateIndices {
  std::size_t i1;
  std::size_t i2;
};

inline CandidateIndices candidate_indices(std::string_view label, std::size_t bucket_count) {
  if (!std::has_single_bit(bucket_count)) throw std::invalid_argument("bucket_count must be a power of two");
  const auto h = hash64(label);
  const auto i1 = static_cast<std::size_t>(h) & (bucket_count - 1);
  return {i1, alternate_index(i1, fingerprint_from_hash(h), bucket_count)};
}

struct BlockHandle {
  static constexpr std::uint32_t kNull = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t value = kNull;

  constexpr explicit operator bool() const noexcept { return value != kNull; }
  friend constexpr bool operator==(BlockHandle, BlockHandle) = default;
};

struct HeadHandle {
  static constexpr std::uint32_t kNull = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t value = kNull;

  constexpr explicit operator bool() const noexcept { return value != kNull; }
  friend constexpr bool operator==(HeadHandle, HeadHandle) = default;
};

/// Fixed-capacity node of an entity's address chain.
template <std::size_t Capacity>
struct AddressBlock {
  std::array<NodeAddress, Capacity> addresses{};
  std::uint32_t used = 0;
  BlockHandle next;

  std::span<const NodeAddress> view() const noexcept { return {addresses.data(), used}; }
};

/// Head of an entity's block list. Keeps the full label so that lookups can
/// be verified exactly and entries can be rehashed on expansion.
struct BlockListHead {
  std::string label;
  std::uint64_t hash = 0;
  std::uint64_t temperature = 0;
  BlockHandle first;
  BlockHandle last;
  std::uint32_t count = 0;
};

struct BucketEntry {
  Fingerprint fp;
  HeadHandle head;
};

enum class InsertOutcome { Inserted, AppendedExisting, Failed };

struct IndexOptions {
  std::size_t initial_buckets = 1024;
  std::size_t max_kicks = 500;
  double grow_threshold = 0.85;
  bool expansion_enabled = true;
  bool sorting_enabled = true;  // temperature-ordered buckets
  std::uint64_t seed = 0x5eed;
};

struct IndexStats {
  std::size_t bucket_count = 0;
  std::size_t entry_count = 0;
  double load_factor = 0.0;
  std::size_t total_addresses = 0;
  std::map<std::size_t, std::uint64_t> kick_histogram;  // kicks needed -> successful placements
  std::uint64_t failed_inserts = 0;
  std::uint64_t expansions = 0;
};

/// Cuckoo filter over entity labels whose entries point at block lists of
/// forest addresses. Buckets hold `SlotsPerBucket` entries; occupied slots
/// always form a prefix of the bucket.
///
/// Not thread-safe: every member except the const lookups needs exclusive access.
template <std::size_t SlotsPerBucket = 4, std::size_t BlockCapacity = 8>
class BasicCuckooIndex {
 public:
  static constexpr std::size_t slots_per_bucket = SlotsPerBucket;
  static constexpr std::size_t block_capacity = BlockCapacity;
  using Block = AddressBlock<BlockCapacity>;
  using Bucket = std::array<BucketEntry, SlotsPerBucket>;

  explicit BasicCuckooIndex(IndexOptions options = {})
      : options_(options), rng_(options.seed) {
    if (!std::has_single_bit(options_.initial_buckets)) {
      throw std::invalid_argument("initial bucket count must be a power of two");
    }
    if (!(options_.grow_threshold > 0.0 && options_.grow_threshold <= 1.0)) {
      throw std::invalid_argument("grow_threshold must be in (0, 1]");
    }
    buckets_.resize(options_.initial_buckets);
  }

  const IndexOptions& options() const noexcept { return options_; }
  std::size_t bucket_count() const noexcept { return buckets_.size(); }
  std::size_t entry_count() const noexcept { return entry_count_; }
  double load_factor() const noexcept {
    return static_cast<double>(entry_count_) / static_cast<double>(buckets_.size() * SlotsPerBucket);
  }

  InsertOutcome insert(std::string_view label, std::span<const NodeAddress> addresses) {
    if (addresses.empty()) throw std::invalid_argument("insert needs at least one address");
    const auto h = hash64(label);
    const auto fp = fingerprint_from_hash(h);

    if (auto existing = find_with_hash(label, h, fp, nullptr)) {
      for (const auto& a : addresses) append_address(existing->head, a);
      return InsertOutcome::AppendedExisting;
    }

    const HeadHandle head = new_head(label, h);
    for (const auto& a : addresses) append_address(head, a);

    auto kicks = place(BucketEntry{fp, head}, home_index(h));
    if (!kicks && options_.expansion_enabled) {
      expand();
      kicks = place(BucketEntry{fp, head}, home_index(h));
    }
    if (!kicks) {
      release_head(head);
      ++failed_inserts_;
      return InsertOutcome::Failed;
    }
    ++kick_histogram_[*kicks];
    ++entry_count_;
    if (options_.expansion_enabled && load_factor() > options_.grow_threshold) expand();
    return InsertOutcome::Inserted;
  }

  bool remove(std::string_view label) {
    const auto h = hash64(label);
    const auto fp = fingerprint_from_hash(h);
    auto hit = find_with_hash(label, h, fp, nullptr);
    if (!hit) return false;
    release_head(hit->head);
    auto& bucket = buckets_[hit->bucket];
    for (std::size_t s = hit->slot; s + 1 < SlotsPerBucket; ++s) bucket[s] = bucket[s + 1];
    bucket[SlotsPerBucket - 1] = BucketEntry{};
    --entry_count_;
    return true;
  }

  /// Exact lookup that bumps the entity's temperature and, when sorting is
  /// enabled, moves hotter entries to the front of the bucket.
  std::optional<HeadHandle> lookup_and_touch(std::string_view label, LocateStats* stats = nullptr) {
    const auto h = hash64(label);
    auto hit = find_with_hash(label, h, fingerprint_from_hash(h), stats);
    if (!hit) return std::nullopt;
    ++heads_[hit->head.value].temperature;
    if (options_.sorting_enabled) reorder(hit->bucket);
    return hit->head;
  }

  /// Exact lookup without side effects; safe to run concurrently with other const lookups.
  std::optional<HeadHandle> find(std::string_view label, LocateStats* stats = nullptr) const {
    const auto h = hash64(label);
    auto hit = find_with_hash(label, h, fingerprint_from_hash(h), stats);
    if (!hit) return std::nullopt;
    return hit->head;
  }

  /// True if any slot in the label's candidate buckets carries its fingerprint,
  /// whether or not the stored label matches.
  bool fingerprint_matches(std::string_view label) const {
    const auto h = hash64(label);
    const auto fp = fingerprint_from_hash(h);
    const auto i1 = home_index(h);
    const auto i2 = alternate_index(i1, fp, buckets_.size());
    auto in = [&](std::size_t b) {
      return std::any_of(buckets_[b].begin(), buckets_[b].end(), [&](const BucketEntry& e) { return e.fp == fp; });
    };
    return in(i1) || in(i2);
  }

  /// Appends `addr` to the entity's chain. Duplicate addresses are ignored.
  bool append_address(HeadHandle handle, NodeAddress addr) {
    auto& head = heads_.at(handle.value);
    for (auto b = head.first; b; b = blocks_[b.value].next) {
      const auto view = blocks_[b.value].view();
      if (std::find(view.begin(), view.end(), addr) != view.end()) return false;
    }
    if (!head.last || blocks_[head.last.value].used == BlockCapacity) {
      const auto fresh = new_block();
      if (head.last) {
        blocks_[head.last.value].next = fresh;
      } else {
        head.first = fresh;
      }
      head.last = fresh;
    }
    auto& blk = blocks_[head.last.value];
    blk.addresses[blk.used++] = addr;
    ++head.count;
    return true;
  }

  const BlockListHead& head(HeadHandle h) const { return heads_.at(h.value); }
  const Block& block(BlockHandle b) const { return blocks_.at(b.value); }

  std::vector<NodeAddress> addresses(HeadHandle h) const {
    std::vector<NodeAddress> out;
    const auto& hd = heads_.at(h.value);
    out.reserve(hd.count);
    for (auto b = hd.first; b; b = blocks_[b.value].next) {
      const auto view = blocks_[b.value].view();
      out.insert(out.end(), view.begin(), view.end());
    }
    return out;
  }

  std::size_t block_count(HeadHandle h) const {
    std::size_t n = 0;
    for (auto b = heads_.at(h.value).first; b; b = blocks_[b.value].next) ++n;
    return n;
  }

  void set_temperature(HeadHandle h, std::uint64_t t) { heads_.at(h.value).temperature = t; }

  void reset_temperatures() {
    for_each_entry([&](std::size_t, std::size_t, const BucketEntry& e) { heads_[e.head.value].temperature = 0; });
  }

  const Bucket& bucket(std::size_t i) const { return buckets_.at(i); }

  /// Visits occupied slots in bucket order: f(bucket index, slot index, entry).
  template <typename F>
  void for_each_entry(F&& f) const {
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
      for (std::size_t s = 0; s < SlotsPerBucket && !buckets_[b][s].fp.empty(); ++s) f(b, s, buckets_[b][s]);
    }
  }

  /// Doubles the bucket array and re-places every entity from its stored label.
  void expand() {
    std::vector<BucketEntry> entries;
    entries.reserve(entry_count_);
    for_each_entry([&](std::size_t, std::size_t, const BucketEntry& e) { entries.push_back(e); });

    std::size_t target = buckets_.size() * 2;
    for (int attempt = 0; attempt < 2; ++attempt, target *= 2) {
      auto previous = std::exchange(buckets_, std::vector<Bucket>(target));
      const bool ok = std::all_of(entries.begin(), entries.end(), [&](const BucketEntry& e) {
        return place(e, home_index(heads_[e.head.value].hash)).has_value();
      });
      if (ok) {
        ++expansions_;
        return;
      }
      buckets_ = std::move(previous);
    }
    throw ExpansionFailed("could not re-place all entities after two doublings from " +
                          std::to_string(buckets_.size()) + " buckets");
  }

  IndexStats stats() const {
    IndexStats s;
    s.bucket_count = buckets_.size();
    s.entry_count = entry_count_;
    s.load_factor = load_factor();
    for_each_entry([&](std::size_t, std::size_t, const BucketEntry& e) { s.total_addresses += heads_[e.head.value].count; });
    s.kick_histogram = kick_histogram_;
    s.failed_inserts = failed_inserts_;
    s.expansions = expansions_;
    return s;
  }

 private:
  struct Hit {
    std::size_t bucket;
    std::size_t slot;
    HeadHandle head;
  };

  std::size_t home_index(std::uint64_t h) const noexcept {
    return static_cast<std::size_t>(h) & (buckets_.size() - 1);
  }

  std::optional<Hit> find_with_hash(std::string_view label, std::uint64_t h, Fingerprint fp,
                                    LocateStats* stats) const {
    const auto i1 = home_index(h);
    const auto i2 = alternate_index(i1, fp, buckets_.size());
    for (auto b : {i1, i2}) {
      const auto& bucket = buckets_[b];
      for (std::size_t s = 0; s < SlotsPerBucket; ++s) {
        const auto& e = bucket[s];
        if (e.fp.empty()) break;
        if (stats) ++stats->visits;
        if (e.fp == fp && heads_[e.head.value].label == label) return Hit{b, s, e.head};
      }
      if (i2 == i1) break;
    }
    return std::nullopt;
  }

  bool try_place(std::size_t b, const BucketEntry& e) {
    for (auto& slot : buckets_[b]) {
      if (slot.fp.empty()) {
        slot = e;
        return true;
      }
    }
    return false;
  }

  // Places `entry` at its home bucket or partner, relocating residents if
  // needed. Returns the number of kicks used, or nullopt after rolling back.
  std::optional<std::size_t> place(BucketEntry entry, std::size_t i1) {
    const auto n = buckets_.size();
    const auto i2 = alternate_index(i1, entry.fp, n);
    if (try_place(i1, entry) || try_place(i2, entry)) return 0;

    std::uniform_int_distribution<std::size_t> pick_slot(0, SlotsPerBucket - 1);
    std::size_t i = (rng_() & 1) ? i1 : i2;
    std::vector<std::pair<std::size_t, std::size_t>> path;
    path.reserve(std::min<std::size_t>(options_.max_kicks, 64));
    for (std::size_t k = 0; k < options_.max_kicks; ++k) {
      const auto m = pick_slot(rng_);
      std::swap(entry, buckets_[i][m]);
      path.emplace_back(i, m);
      i = alternate_index(i, entry.fp, n);
      if (try_place(i, entry)) return k + 1;
    }
    for (auto it = path.rbegin(); it != path.rend(); ++it) std::swap(entry, buckets_[it->first][it->second]);
    return std::nullopt;
  }

  // Stable descending-temperature order over the occupied prefix.
  void reorder(std::size_t b) {
    auto& bucket = buckets_[b];
    for (std::size_t s = 1; s < SlotsPerBucket && !bucket[s].fp.empty(); ++s) {
      const auto t = heads_[bucket[s].head.value].temperature;
      for (std::size_t j = s; j > 0 && heads_[bucket[j - 1].head.value].temperature < t; --j) {
        std::swap(bucket[j - 1], bucket[j]);
      }
    }
  }

  HeadHandle new_head(std::string_view label, std::uint64_t h) {
    HeadHandle handle;
    if (!free_heads_.empty()) {
      handle.value = free_heads_.back();
      free_heads_.pop_back();
    } else {
      handle.value = static_cast<std::uint32_t>(heads_.size());
      heads_.emplace_back();
    }
    heads_[handle.value] = BlockListHead{std::string(label), h, 0, {}, {}, 0};
    return handle;
  }

  BlockHandle new_block() {
    BlockHandle handle;
    if (!free_blocks_.empty()) {
      handle.value = free_blocks_.back();
      free_blocks_.pop_back();
    } else {
      handle.value = static_cast<std::uint32_t>(blocks_.size());
      blocks_.emplace_back();
    }
    blocks_[handle.value] = Block{};
    return handle;
  }

  void release_head(HeadHandle handle) {
    auto& head = heads_[handle.value];
    for (auto b = head.first; b;) {
      const auto next = blocks_[b.value].next;
      free_blocks_.push_back(b.value);
      b = next;
    }
    head = BlockListHead{};
    free_heads_.push_back(handle.value);
  }

  IndexOptions options_;
  std::mt19937_64 rng_;
  std::vector<Bucket> buckets_;
  std::vector<BlockListHead> heads_;
  std::vector<Block> blocks_;
  std::vector<std::uint32_t> free_heads_;
  std::vector<std::uint32_t> free_blocks_;
  std::size_t entry_count_ = 0;
  std::map<std::size_t, std::uint64_t> kick_histogram_;
  std::uint64_t failed_inserts_ = 0;
  std::uint64_t expansions_ = 0;
};

using CuckooIndex = BasicCuckooIndex<4, 8>;

/// Indexes every distinct label of `forest` with all of its addresses.
template <std::size_t S, std::size_t B>
void index_forest(BasicCuckooIndex<S, B>& index, const Forest& forest) {
  for (const auto& [label, addrs] : label_occurrences(forest)) {
    if (index.insert(label, addrs) == InsertOutcome::Failed) {
      throw InvariantError("cuckoo index rejected entity '" + label + "'");
    }
  }
}

inline CuckooIndex build_index(const Forest& forest, IndexOptions options = {}) {
  CuckooIndex index(options);
  index_forest(index, forest);
  return index;
}

}  // namespace cftrag
