#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cftrag/error.hpp"
#include "cftrag/label.hpp"

namespace cftrag {

/// One extracted "parent contains child" relation.
struct RelationTuple {
  std::uint64_t tree_id = 0;
  std::string parent;
  std::string child;
  std::uint64_t seq = 0;

  friend bool operator==(const RelationTuple&, const RelationTuple&) = default;
};

/// One occurrence of an entity: node `node` of tree `tree`.
struct NodeAddress {
  std::uint32_t tree = 0;
  std::uint32_t node = 0;

  friend auto operator<=>(const NodeAddress&, const NodeAddress&) = default;
};

/// Work counters reported by the retrievers.
struct LocateStats {
  std::uint64_t visits = 0;  // nodes whose label was compared, or index slots examined
  std::uint64_t probes = 0;  // membership-filter probes
};

struct TreeNode {
  std::string label;
  std::optional<std::uint32_t> parent;
  std::vector<std::uint32_t> children;
};

class Tree {
 public:
  std::uint32_t add_root(std::string label) {
    if (!nodes_.empty()) throw InvariantError("tree already has a root");
    nodes_.push_back(TreeNode{std::move(label), std::nullopt, {}});
    root_ = 0;
    return 0;
  }

  std::uint32_t add_child(std::uint32_t parent, std::string label) {
    if (parent >= nodes_.size()) throw InvalidAddress("parent index out of range");
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(TreeNode{std::move(label), parent, {}});
    nodes_[parent].children.push_back(id);
    return id;
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  std::uint32_t root() const noexcept { return root_; }
  const TreeNode& node(std::uint32_t i) const { return nodes_.at(i); }
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }

  std::size_t depth(std::uint32_t i) const {
    std::size_t d = 0;
    for (auto p = nodes_.at(i).parent; p; p = nodes_[*p].parent) ++d;
    return d;
  }

 private:
  friend Tree make_tree(std::vector<TreeNode> nodes, std::uint32_t root);

  std::vector<TreeNode> nodes_;
  std::uint32_t root_ = 0;
};

/// Assembles a tree from prebuilt nodes whose parent/children links are already consistent.
inline Tree make_tree(std::vector<TreeNode> nodes, std::uint32_t root) {
  Tree t;
  t.nodes_ = std::move(nodes);
  t.root_ = root;
  return t;
}

/// A collection of rooted entity trees. Immutable once built.
class Forest {
 public:
  Forest() = default;
  explicit Forest(std::vector<Tree> trees) : trees_(std::move(trees)) {}

  void add_tree(Tree tree) { trees_.push_back(std::move(tree)); }

  std::size_t tree_count() const noexcept { return trees_.size(); }
  const Tree& tree(std::size_t i) const { return trees_.at(i); }
  std::span<const Tree> trees() const noexcept { return trees_; }

  std::size_t node_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : trees_) n += t.size();
    return n;
  }

  bool contains(NodeAddress a) const noexcept {
    return a.tree < trees_.size() && a.node < trees_[a.tree].size();
  }

  const std::string& label(NodeAddress a) const {
    if (!contains(a)) throw InvalidAddress(describe(a));
    return trees_[a.tree].node(a.node).label;
  }

  static std::string describe(NodeAddress a) {
    return "address (" + std::to_string(a.tree) + ", " + std::to_string(a.node) + ")";
  }

 private:
  std::vector<Tree> trees_;
};

// ---------------------------------------------------------------------------
// Relation filtering

namespace detail {

struct TreeGraph {
  std::vector<std::string> labels;                        // local id -> label, first-seen order
  std::unordered_map<std::string, std::uint32_t> ids;
  std::uint32_t id(const std::string& label) {
    auto [it, inserted] = ids.try_emplace(label, static_cast<std::uint32_t>(labels.size()));
    if (inserted) labels.push_back(label);
    return it->second;
  }
};

// Is `to` reachable from `from` over `adj`, ignoring the direct edge skip_from -> skip_to?
inline bool reachable(const std::vector<std::vector<std::uint32_t>>& adj, std::uint32_t from,
                      std::uint32_t to, std::optional<std::pair<std::uint32_t, std::uint32_t>> skip = {}) {
  std::vector<char> seen(adj.size(), 0);
  std::vector<std::uint32_t> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto v : adj[u]) {
      if (skip && skip->first == u && skip->second == v) continue;
      if (v == to) return true;
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return false;
}

}  // namespace detail

/// Applies the relation-cleaning rules per tree_id: drops self-loops, collapses
/// duplicate edges to the earliest, breaks cycles by dropping any edge that
/// would close a cycle over earlier-seq edges (so the largest-seq edge of each
/// cycle goes), then removes transitive shortcut edges. Output is ordered by seq.
inline std::vector<RelationTuple> filter_relations(std::span<const RelationTuple> tuples) {
  std::vector<RelationTuple> sorted(tuples.begin(), tuples.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.seq < b.seq; });

  std::map<std::uint64_t, std::vector<const RelationTuple*>> by_tree;
  for (const auto& t : sorted) by_tree[t.tree_id].push_back(&t);

  std::vector<RelationTuple> out;
  for (const auto& [tree_id, edges] : by_tree) {
    detail::TreeGraph g;
    struct Edge {
      std::uint32_t u, w;
      const RelationTuple* src;
    };
    std::vector<Edge> candidates;
    std::unordered_set<std::uint64_t> seen_pairs;
    for (const auto* t : edges) {
      if (t->parent == t->child) continue;
      const auto u = g.id(t->parent);
      const auto w = g.id(t->child);
      const auto key = (std::uint64_t{u} << 32) | w;
      if (!seen_pairs.insert(key).second) continue;
      candidates.push_back({u, w, t});
    }

    std::vector<std::vector<std::uint32_t>> adj(g.labels.size());
    std::vector<Edge> kept;
    for (const auto& e : candidates) {
      if (detail::reachable(adj, e.w, e.u)) continue;  // would close a cycle
      adj[e.u].push_back(e.w);
      kept.push_back(e);
    }

    for (const auto& e : kept) {
      if (detail::reachable(adj, e.u, e.w, std::pair{e.u, e.w})) continue;  // shortcut
      out.push_back(*e.src);
    }
  }

  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
  return out;
}

/// Builds one tree per (tree_id, connected component). Trees are ordered by
/// tree_id, then by the first appearance of the component; nodes within a tree
/// keep first-seen order.
inline Forest build_forest(std::span<const RelationTuple> tuples) {
  std::vector<const RelationTuple*> sorted;
  sorted.reserve(tuples.size());
  for (const auto& t : tuples) sorted.push_back(&t);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* a, const auto* b) { return a->seq < b->seq; });

  std::map<std::uint64_t, std::vector<const RelationTuple*>> by_tree;
  for (const auto* t : sorted) by_tree[t->tree_id].push_back(t);

  Forest forest;
  for (const auto& [tree_id, edges] : by_tree) {
    detail::TreeGraph g;
    std::vector<std::optional<std::uint32_t>> parent;
    std::vector<std::vector<std::uint32_t>> children;
    auto ensure = [&](std::uint32_t id) {
      if (id >= parent.size()) {
        parent.resize(id + 1);
        children.resize(id + 1);
      }
    };
    for (const auto* t : edges) {
      const auto u = g.id(t->parent);
      ensure(u);
      const auto w = g.id(t->child);
      ensure(w);
      if (u == w) throw DataError("self-loop on '" + t->parent + "' in tree " + std::to_string(tree_id));
      if (parent[w]) {
        if (*parent[w] == u) continue;
        throw MultipleParents(t->child, tree_id);
      }
      parent[w] = u;
      children[u].push_back(w);
    }

    const auto n = static_cast<std::uint32_t>(g.labels.size());
    std::vector<std::uint32_t> root_of(n);
    for (std::uint32_t v = 0; v < n; ++v) {
      auto r = v;
      std::size_t steps = 0;
      while (parent[r]) {
        r = *parent[r];
        if (++steps > n) throw DataError("cycle in tree " + std::to_string(tree_id));
      }
      root_of[v] = r;
    }

    // Components in order of their first-seen member.
    std::vector<std::uint32_t> component_roots;
    std::vector<char> root_seen(n, 0);
    for (std::uint32_t v = 0; v < n; ++v) {
      if (!root_seen[root_of[v]]) {
        root_seen[root_of[v]] = 1;
        component_roots.push_back(root_of[v]);
      }
    }

    for (auto root : component_roots) {
      std::vector<std::uint32_t> local(n, UINT32_MAX);
      std::vector<TreeNode> nodes;
      for (std::uint32_t v = 0; v < n; ++v) {
        if (root_of[v] != root) continue;
        local[v] = static_cast<std::uint32_t>(nodes.size());
        nodes.push_back(TreeNode{g.labels[v], std::nullopt, {}});
      }
      for (std::uint32_t v = 0; v < n; ++v) {
        if (root_of[v] != root) continue;
        auto& node = nodes[local[v]];
        if (parent[v]) node.parent = local[*parent[v]];
        for (auto c : children[v]) node.children.push_back(local[c]);
      }
      forest.add_tree(make_tree(std::move(nodes), local[root]));
    }
  }
  return forest;
}

// ---------------------------------------------------------------------------
// Oracle and traversal

/// Every address carrying `label`, in (tree, node) order. Brute-force scan;
/// this is the reference every retriever is checked against.
inline std::vector<NodeAddress> locate_all(const Forest& forest, std::string_view label) {
  std::vector<NodeAddress> out;
  for (std::uint32_t t = 0; t < forest.tree_count(); ++t) {
    const auto nodes = forest.tree(t).nodes();
    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].label == label) out.push_back({t, i});
    }
  }
  return out;
}

/// Distinct labels with all their addresses, labels in first-seen (tree, node) order.
inline std::vector<std::pair<std::string, std::vector<NodeAddress>>> label_occurrences(const Forest& forest) {
  std::vector<std::pair<std::string, std::vector<NodeAddress>>> out;
  std::unordered_map<std::string_view, std::size_t> slot;
  for (std::uint32_t t = 0; t < forest.tree_count(); ++t) {
    const auto nodes = forest.tree(t).nodes();
    for (std::uint32_t i = 0; i < nodes.size(); ++i) {
      auto [it, inserted] = slot.try_emplace(nodes[i].label, out.size());
      if (inserted) out.push_back({nodes[i].label, {}});
      out[it->second].second.push_back({t, i});
    }
  }
  return out;
}

/// Label -> sorted addresses, for bulk oracle checks.
using LabelIndex = std::unordered_map<std::string, std::vector<NodeAddress>>;

inline LabelIndex build_label_index(const Forest& forest) {
  LabelIndex index;
  for (auto& [label, addrs] : label_occurrences(forest)) index.emplace(label, std::move(addrs));
  return index;
}

struct HierarchyChain {
  std::vector<std::string> up;    // nearest ancestor first
  std::vector<std::string> down;  // breadth-first, nearest level first
};

/// Up to `n` ancestors and up to `n` descendants of the node at `addr`.
inline HierarchyChain hierarchy_chain(const Forest& forest, NodeAddress addr, std::size_t n) {
  if (!forest.contains(addr)) throw InvalidAddress(Forest::describe(addr) + " is out of bounds");
  const auto& tree = forest.tree(addr.tree);

  HierarchyChain chain;
  for (auto p = tree.node(addr.node).parent; p && chain.up.size() < n; p = tree.node(*p).parent) {
    chain.up.push_back(tree.node(*p).label);
  }

  std::deque<std::uint32_t> queue(tree.node(addr.node).children.begin(), tree.node(addr.node).children.end());
  while (!queue.empty() && chain.down.size() < n) {
    const auto v = queue.front();
    queue.pop_front();
    chain.down.push_back(tree.node(v).label);
    const auto& kids = tree.node(v).children;
    queue.insert(queue.end(), kids.begin(), kids.end());
  }
  return chain;
}

// ---------------------------------------------------------------------------
// Relation tuple files: `tree_id<TAB>parent<TAB>child`, '#' comments, seq = line number.

inline std::vector<RelationTuple> read_relations(std::istream& in, const std::string& path = "<stream>") {
  std::vector<RelationTuple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos || line.find('\t', tab2 + 1) != std::string::npos) {
      throw ParseError(path, lineno, "expected exactly three tab-separated fields");
    }
    const std::string_view id_field = std::string_view(line).substr(0, tab1);
    std::uint64_t tree_id = 0;
    if (id_field.empty() || id_field.find_first_not_of("0123456789") != std::string_view::npos) {
      throw ParseError(path, lineno, "tree_id must be a non-negative integer");
    }
    try {
      tree_id = std::stoull(std::string(id_field));
    } catch (const std::exception&) {
      throw ParseError(path, lineno, "tree_id out of range");
    }
    RelationTuple t{tree_id, normalize_label(line.substr(tab1 + 1, tab2 - tab1 - 1)),
                    normalize_label(line.substr(tab2 + 1)), lineno};
    if (t.parent.empty() || t.child.empty()) throw ParseError(path, lineno, "empty entity label");
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<RelationTuple> read_relations_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open relation file '" + path + "'");
  return read_relations(in, path);
}

}  // namespace cftrag
