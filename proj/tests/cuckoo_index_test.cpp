#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cftrag/cuckoo_index.hpp"

using namespace cftrag;

namespace {

const NodeAddress kAddr{0, 0};
std::span<const NodeAddress> one(const NodeAddress& a = kAddr) { return {&a, 1}; }

std::string name(std::size_t i) { return "entity-" + std::to_string(i); }

IndexOptions fixed(std::size_t buckets) {
  IndexOptions o;
  o.initial_buckets = buckets;
  o.expansion_enabled = false;
  return o;
}

// Every occupied slot sits in one of its entity's candidate buckets with the
// right fingerprint, slots form a prefix, and entry_count matches.
template <std::size_t S, std::size_t B>
void audit(const BasicCuckooIndex<S, B>& index) {
  std::size_t seen = 0;
  index.for_each_entry([&](std::size_t b, std::size_t, const BucketEntry& e) {
    ++seen;
    const auto& head = index.head(e.head);
    const auto [i1, i2] = candidate_indices(head.label, index.bucket_count());
    EXPECT_TRUE(b == i1 || b == i2) << head.label << " in bucket " << b;
    EXPECT_EQ(e.fp, fingerprint(head.label));
  });
  for (std::size_t b = 0; b < index.bucket_count(); ++b) {
    const auto& bucket = index.bucket(b);
    for (std::size_t s = 1; s < S; ++s) {
      if (!bucket[s].fp.empty()) EXPECT_FALSE(bucket[s - 1].fp.empty()) << "hole in bucket " << b;
    }
  }
  EXPECT_EQ(seen, index.entry_count());
}

std::set<std::string> found_labels(const CuckooIndex& index, const std::vector<std::string>& universe) {
  std::set<std::string> out;
  for (const auto& l : universe) {
    if (auto h = index.find(l)) {
      EXPECT_EQ(index.head(*h).label, l);
      out.insert(l);
    }
  }
  return out;
}

}  // namespace

TEST(CuckooIndex, InsertThenLookup) {
  CuckooIndex index;
  EXPECT_EQ(index.insert("A", one()), InsertOutcome::Inserted);
  const auto h = index.lookup_and_touch("A");
  ASSERT_TRUE(h);
  EXPECT_EQ(index.head(*h).label, "A");
  EXPECT_EQ(index.addresses(*h), std::vector<NodeAddress>{kAddr});
  EXPECT_FALSE(index.lookup_and_touch("B"));
}

TEST(CuckooIndex, EmptyIndex) {
  CuckooIndex index;
  EXPECT_FALSE(index.lookup_and_touch("A"));
  EXPECT_FALSE(index.remove("A"));
  const auto s = index.stats();
  EXPECT_EQ(s.load_factor, 0.0);
  EXPECT_EQ(s.entry_count, 0u);
  EXPECT_EQ(s.bucket_count, 1024u);
}

TEST(CuckooIndex, RejectsBadOptions) {
  EXPECT_THROW(CuckooIndex(fixed(1000)), std::invalid_argument);
  IndexOptions o;
  o.grow_threshold = 0.0;
  EXPECT_THROW(CuckooIndex{o}, std::invalid_argument);
  CuckooIndex index;
  EXPECT_THROW(index.insert("A", {}), std::invalid_argument);
}

TEST(CuckooIndex, SecondInsertAppends) {
  CuckooIndex index;
  const std::vector<NodeAddress> a{{0, 1}, {0, 2}}, b{{1, 0}, {0, 2}, {2, 5}};
  EXPECT_EQ(index.insert("X", a), InsertOutcome::Inserted);
  EXPECT_EQ(index.insert("X", b), InsertOutcome::AppendedExisting);
  EXPECT_EQ(index.entry_count(), 1u);
  const auto h = index.find("X");
  ASSERT_TRUE(h);
  EXPECT_EQ(index.head(*h).count, 4u);
  EXPECT_EQ(index.addresses(*h), (std::vector<NodeAddress>{{0, 1}, {0, 2}, {1, 0}, {2, 5}}));
  EXPECT_EQ(index.stats().total_addresses, 4u);
}

TEST(CuckooIndex, RemoveRoundTrip) {
  CuckooIndex index;
  index.insert("A", one());
  EXPECT_TRUE(index.remove("A"));
  EXPECT_FALSE(index.lookup_and_touch("A"));
  EXPECT_FALSE(index.remove("A"));
  EXPECT_EQ(index.entry_count(), 0u);
}

TEST(CuckooIndex, RemoveHalfKeepsTheRest) {
  CuckooIndex index;
  std::vector<std::string> all;
  for (std::size_t i = 0; i < 100; ++i) {
    all.push_back(name(i));
    index.insert(all.back(), one());
  }
  std::set<std::string> survivors;
  for (std::size_t i = 0; i < 100; ++i) {
    if (i % 2) {
      EXPECT_TRUE(index.remove(all[i]));
    } else {
      survivors.insert(all[i]);
    }
  }
  EXPECT_EQ(found_labels(index, all), survivors);
  audit(index);
}

TEST(CuckooIndex, HotEntryMovesToFront) {
  CuckooIndex index(fixed(1));  // one bucket: everything collides
  index.insert("A", one());
  index.insert("B", one());
  for (int i = 0; i < 3; ++i) index.lookup_and_touch("B");
  index.lookup_and_touch("A");
  const auto& bucket = index.bucket(0);
  EXPECT_EQ(index.head(bucket[0].head).label, "B");
  EXPECT_EQ(index.head(bucket[1].head).label, "A");
}

TEST(CuckooIndex, SortingDisabledKeepsInsertionOrder) {
  auto o = fixed(1);
  o.sorting_enabled = false;
  CuckooIndex index(o);
  index.insert("A", one());
  index.insert("B", one());
  for (int i = 0; i < 3; ++i) index.lookup_and_touch("B");
  EXPECT_EQ(index.head(index.bucket(0)[0].head).label, "A");
}

TEST(CuckooIndex, BucketsStaySortedByTemperature) {
  CuckooIndex index(fixed(16));
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < 40; ++i) {
    labels.push_back(name(i));
    ASSERT_EQ(index.insert(labels.back(), one()), InsertOutcome::Inserted);
  }
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) index.lookup_and_touch(labels[rng() % labels.size()]);
  for (std::size_t b = 0; b < index.bucket_count(); ++b) {
    const auto& bucket = index.bucket(b);
    for (std::size_t s = 1; s < CuckooIndex::slots_per_bucket && !bucket[s].fp.empty(); ++s) {
      EXPECT_GE(index.head(bucket[s - 1].head).temperature, index.head(bucket[s].head).temperature);
    }
  }
  audit(index);
}

TEST(CuckooIndex, TemperatureCountsLookups) {
  CuckooIndex index;
  index.insert("A", one());
  for (int t = 1; t <= 7; ++t) {
    const auto h = index.lookup_and_touch("A");
    ASSERT_TRUE(h);
    EXPECT_EQ(index.head(*h).temperature, static_cast<std::uint64_t>(t));
  }
  index.find("A");  // const lookup does not touch
  EXPECT_EQ(index.head(*index.find("A")).temperature, 7u);
  index.reset_temperatures();
  EXPECT_EQ(index.head(*index.find("A")).temperature, 0u);
}

TEST(CuckooIndex, AppendAddressBlockArithmetic) {
  CuckooIndex index;
  index.insert("A", one({0, 0}));
  const auto h = *index.find("A");
  EXPECT_EQ(index.block_count(h), 1u);
  for (std::uint32_t i = 1; i <= CuckooIndex::block_capacity; ++i) EXPECT_TRUE(index.append_address(h, {0, i}));
  EXPECT_EQ(index.head(h).count, CuckooIndex::block_capacity + 1);
  EXPECT_EQ(index.block_count(h), 2u);
  EXPECT_EQ(index.block(index.head(h).first).used, CuckooIndex::block_capacity);
  EXPECT_EQ(index.block(index.head(h).last).used, 1u);
  EXPECT_FALSE(index.append_address(h, {0, 3}));
  EXPECT_EQ(index.head(h).count, CuckooIndex::block_capacity + 1);
}

TEST(CuckooIndex, ThreeThousandEntitiesInOneThousandBuckets) {
  CuckooIndex index(fixed(1024));
  std::size_t ok = 0;
  for (std::size_t i = 0; i < 3148; ++i) ok += index.insert(name(i), one()) == InsertOutcome::Inserted;
  EXPECT_EQ(ok, 3148u);
  EXPECT_NEAR(index.stats().load_factor, 0.7686, 1e-4);
  EXPECT_EQ(index.stats().failed_inserts, 0u);
  audit(index);
}

TEST(CuckooIndex, SaturationEitherFillsOrReportsFailures) {
  CuckooIndex index(fixed(1024));
  std::vector<std::string> labels;
  std::set<std::string> inserted;
  for (std::size_t i = 0; i < 4096; ++i) {
    labels.push_back(name(i));
    if (index.insert(labels.back(), one()) == InsertOutcome::Inserted) inserted.insert(labels.back());
    // A failed insert must roll back its kick path: nothing already stored is lost.
  }
  const auto s = index.stats();
  EXPECT_EQ(s.entry_count + s.failed_inserts, 4096u);
  if (s.failed_inserts == 0) {
    EXPECT_EQ(s.load_factor, 1.0);
  } else {
    EXPECT_LT(s.load_factor, 1.0);
  }
  EXPECT_EQ(found_labels(index, labels), inserted);
  audit(index);
}

TEST(CuckooIndex, ExpandEmpty) {
  CuckooIndex index;
  index.expand();
  EXPECT_EQ(index.bucket_count(), 2048u);
  EXPECT_EQ(index.entry_count(), 0u);
}

TEST(CuckooIndex, GrowsPastThreshold) {
  CuckooIndex index;  // 1024 buckets, threshold 0.85
  for (std::size_t i = 0; i < 3500; ++i) ASSERT_NE(index.insert(name(i), one()), InsertOutcome::Failed);
  const auto s = index.stats();
  EXPECT_EQ(s.bucket_count, 2048u);
  EXPECT_NEAR(s.load_factor, 0.4272, 1e-4);
  EXPECT_GE(s.expansions, 1u);
  audit(index);
}

TEST(CuckooIndex, ExpandPreservesContents) {
  std::mt19937_64 rng(9);
  for (int round = 0; round < 20; ++round) {
    CuckooIndex index(fixed(64));
    std::vector<std::string> labels;
    std::map<std::string, std::vector<NodeAddress>> before;
    const auto n = 50 + rng() % 150;
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back("r" + std::to_string(rng()));
      std::vector<NodeAddress> addrs;
      for (std::size_t k = 0, m = 1 + rng() % 12; k < m; ++k) addrs.push_back({std::uint32_t(rng() % 5), std::uint32_t(k)});
      if (index.insert(labels.back(), addrs) == InsertOutcome::Failed) continue;
      const auto h = *index.find(labels.back());
      index.set_temperature(h, rng() % 100);
      before[labels.back()] = index.addresses(h);
    }
    std::map<std::string, std::uint64_t> temps;
    for (const auto& [l, a] : before) temps[l] = index.head(*index.find(l)).temperature;

    const auto entries = index.entry_count();
    index.expand();
    EXPECT_EQ(index.bucket_count(), 128u);
    EXPECT_EQ(index.entry_count(), entries);
    for (const auto& [l, a] : before) {
      const auto h = index.find(l);
      ASSERT_TRUE(h) << l;
      EXPECT_EQ(index.addresses(*h), a);
      EXPECT_EQ(index.head(*h).temperature, temps[l]);
    }
    audit(index);
  }
}

TEST(CuckooIndex, ChurnHasNoFalseNegatives) {
  CuckooIndex index;
  std::mt19937_64 rng(21);
  std::set<std::string> live, dead;
  std::vector<std::string> pool;
  for (std::size_t i = 0; i < 2000; ++i) pool.push_back(name(i));
  for (int op = 0; op < 10000; ++op) {
    const auto& l = pool[rng() % pool.size()];
    if (rng() % 3) {
      ASSERT_NE(index.insert(l, one()), InsertOutcome::Failed);
      live.insert(l);
      dead.erase(l);
    } else {
      ASSERT_EQ(index.remove(l), live.count(l) == 1);
      live.erase(l);
      dead.insert(l);
    }
  }
  for (const auto& l : live) ASSERT_TRUE(index.lookup_and_touch(l)) << l;
  for (const auto& l : dead) ASSERT_FALSE(index.lookup_and_touch(l)) << l;
  EXPECT_EQ(index.entry_count(), live.size());
  audit(index);
}

TEST(CuckooIndex, LabelGuardRejectsFingerprintTwins) {
  // Find an absent label whose fingerprint matches a stored one in a candidate bucket.
  CuckooIndex index(fixed(1));
  index.insert("stored", one());
  const auto fp = fingerprint("stored");
  std::string twin;
  for (std::size_t i = 0; twin.empty(); ++i) {
    if (fingerprint(name(i)) == fp) twin = name(i);
  }
  EXPECT_TRUE(index.fingerprint_matches(twin));
  EXPECT_FALSE(index.find(twin));
  EXPECT_FALSE(index.lookup_and_touch(twin));
  EXPECT_EQ(index.insert(twin, one()), InsertOutcome::Inserted);
  EXPECT_EQ(index.entry_count(), 2u);
  EXPECT_TRUE(index.remove(twin));
  EXPECT_TRUE(index.find("stored"));
}

TEST(CuckooIndex, KickHistogramAccountsForEveryInsert) {
  CuckooIndex index(fixed(512));
  for (std::size_t i = 0; i < 1700; ++i) index.insert(name(i), one());
  const auto s = index.stats();
  std::uint64_t total = 0;
  for (const auto& [kicks, n] : s.kick_histogram) total += n;
  EXPECT_EQ(total, s.entry_count);
  EXPECT_GT(s.kick_histogram.size(), 1u);  // high load forces some relocations
}

TEST(CuckooIndex, IndexForestMatchesOracle) {
  Tree t;
  const auto r = t.add_root("A");
  t.add_child(r, "B");
  t.add_child(r, "A");
  Forest f;
  f.add_tree(t);
  f.add_tree(t);
  auto index = build_index(f);
  EXPECT_EQ(index.entry_count(), 2u);
  EXPECT_EQ(index.addresses(*index.find("A")), (std::vector<NodeAddress>{{0, 0}, {0, 2}, {1, 0}, {1, 2}}));
}
