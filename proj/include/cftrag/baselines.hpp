#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cftrag/bloom.hpp"
#include "cftrag/forest.hpp"
#include "cftrag/hash.hpp"

namespace cftrag {

/// Breadth-first scan of every tree. Results in (tree, node) order.
inline std::vector<NodeAddress> naive_locate(const Forest& forest, std::string_view label,
                                             LocateStats* stats = nullptr) {
  std::vector<NodeAddress> out;
  std::vector<std::uint32_t> queue;
  std::uint64_t visits = 0;
  for (std::uint32_t t = 0; t < forest.tree_count(); ++t) {
    const auto& tree = forest.tree(t);
    if (tree.empty()) continue;
    const auto nodes = tree.nodes();
    queue.clear();
    queue.push_back(tree.root());
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const auto v = queue[head];
      ++visits;
      if (nodes[v].label == label) out.push_back({t, v});
      queue.insert(queue.end(), nodes[v].children.begin(), nodes[v].children.end());
    }
  }
  if (stats) stats->visits += visits;
  std::sort(out.begin(), out.end());
  return out;
}

struct BloomParams {
  std::size_t bits_per_element = 10;
  unsigned hash_count = 4;
};

/// A forest with one Bloom filter per node over the labels of that node's
/// subtree (the node included).
class BloomAnnotatedForest {
 public:
  BloomAnnotatedForest(const Forest& forest, BloomParams params) : forest_(&forest) {
    if (params.bits_per_element == 0 || params.hash_count == 0) {
      throw std::invalid_argument("bits_per_element and k must be positive");
    }
    std::unordered_map<std::string_view, std::uint32_t> label_ids;
    std::vector<std::uint64_t> id_hashes;
    filters_.resize(forest.tree_count());
    leaf_parent_.resize(forest.tree_count());

    for (std::size_t t = 0; t < forest.tree_count(); ++t) {
      const auto nodes = forest.tree(t).nodes();
      const auto n = nodes.size();

      std::vector<std::uint32_t> ids(n);
      for (std::size_t v = 0; v < n; ++v) {
        auto [it, inserted] = label_ids.try_emplace(nodes[v].label, static_cast<std::uint32_t>(label_ids.size()));
        if (inserted) id_hashes.push_back(hash64(nodes[v].label));
        ids[v] = it->second;
      }

      // Children are visited after their parents in BFS order, so the reverse
      // BFS order is a valid bottom-up schedule.
      std::vector<std::uint32_t> order;
      order.reserve(n);
      if (n > 0) order.push_back(forest.tree(t).root());
      for (std::size_t i = 0; i < order.size(); ++i) {
        for (auto c : nodes[order[i]].children) order.push_back(c);
      }

      std::vector<std::vector<std::uint32_t>> subtree(n);  // sorted distinct label ids
      auto& filters = filters_[t];
      filters.resize(n);
      auto& leaf_parent = leaf_parent_[t];
      leaf_parent.assign(n, 0);

      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto v = *it;
        std::vector<std::uint32_t> set{ids[v]};
        bool all_leaves = !nodes[v].children.empty();
        for (auto c : nodes[v].children) {
          std::vector<std::uint32_t> merged;
          merged.reserve(set.size() + subtree[c].size());
          std::set_union(set.begin(), set.end(), subtree[c].begin(), subtree[c].end(), std::back_inserter(merged));
          set = std::move(merged);
          if (!nodes[c].children.empty()) all_leaves = false;
        }
        leaf_parent[v] = all_leaves ? 1 : 0;

        const auto bits = std::max<std::size_t>(64, set.size() * params.bits_per_element);
        BloomFilter filter(bits, params.hash_count);
        for (auto id : set) filter.insert(id_hashes[id]);
        filters[v] = std::move(filter);
        subtree[v] = std::move(set);
        for (auto c : nodes[v].children) std::vector<std::uint32_t>().swap(subtree[c]);
      }
    }
  }

  const Forest& forest() const noexcept { return *forest_; }
  const BloomFilter& filter(NodeAddress a) const { return filters_.at(a.tree).at(a.node); }

  /// True when every child of the node is a leaf (and it has at least one child).
  bool children_all_leaves(NodeAddress a) const { return leaf_parent_.at(a.tree).at(a.node) != 0; }

  /// Shared traversal for both Bloom retrievers; results in (tree, node) order.
  template <bool SkipLeafProbes>
  std::vector<NodeAddress> locate(std::string_view label, LocateStats* stats) const {
    const auto h = hash64(label);
    std::vector<NodeAddress> out;
    std::vector<std::uint32_t> queue;
    std::uint64_t visits = 0;
    std::uint64_t probes = 0;
    for (std::uint32_t t = 0; t < forest_->tree_count(); ++t) {
      const auto& tree = forest_->tree(t);
      if (tree.empty()) continue;
      const auto nodes = tree.nodes();
      const auto& filters = filters_[t];
      ++probes;
      if (!filters[tree.root()].query(h)) continue;

      queue.clear();
      queue.push_back(tree.root());
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto v = queue[head];
        ++visits;
        if (nodes[v].label == label) out.push_back({t, v});
        if (SkipLeafProbes && leaf_parent_[t][v]) {
          for (auto c : nodes[v].children) {
            ++visits;
            if (nodes[c].label == label) out.push_back({t, c});
          }
          continue;
        }
        for (auto c : nodes[v].children) {
          ++probes;
          if (filters[c].query(h)) queue.push_back(c);
        }
      }
    }
    if (stats) {
      stats->visits += visits;
      stats->probes += probes;
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  const Forest* forest_;
  std::vector<std::vector<BloomFilter>> filters_;
  std::vector<std::vector<char>> leaf_parent_;
};

/// The annotated forest references `forest`, which must outlive it.
inline BloomAnnotatedForest bloom_build(const Forest& forest, BloomParams params = {}) {
  return BloomAnnotatedForest(forest, params);
}

/// Top-down search that descends only into children whose filter admits the label.
inline std::vector<NodeAddress> bloom_locate(const BloomAnnotatedForest& annotated, std::string_view label,
                                             LocateStats* stats = nullptr) {
  return annotated.locate<false>(label, stats);
}

/// Like bloom_locate, but nodes whose children are all leaves compare the
/// child labels directly instead of probing the child filters.
inline std::vector<NodeAddress> improved_bloom_locate(const BloomAnnotatedForest& annotated,
                                                      std::string_view label, LocateStats* stats = nullptr) {
  return annotated.locate<true>(label, stats);
}

}  // namespace cftrag
