#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "cftrag/cuckoo_index.hpp"
#include "cftrag/error.hpp"
#include "cftrag/forest.hpp"
#include "cftrag/text_io.hpp"

// Text snapshot of a forest and its cuckoo index:
//
//   cftrag-snapshot 1
//   forest <tree_count>
//   tree <node_count> <root>
//   <parent or -><TAB><label>            (one line per node, node order)
//   index <bucket_count> <entity_count> <max_kicks> <grow_threshold> <expansion> <sorting> <seed>
//   <temperature><TAB><label><TAB><tree>:<node>[,<tree>:<node>...]
//   end
//
// Entities are listed in bucket/slot order with addresses in block-list
// order. Labels never contain tabs or newlines (the ingestion format forbids them).

namespace cftrag {

inline constexpr int kSnapshotVersion = 1;

struct Snapshot {
  Forest forest;
  CuckooIndex index;
};

template <std::size_t S, std::size_t B>
void write_snapshot(std::ostream& out, const Forest& forest, const BasicCuckooIndex<S, B>& index) {
  out << "cftrag-snapshot " << kSnapshotVersion << '\n';
  out << "forest " << forest.tree_count() << '\n';
  for (const auto& tree : forest.trees()) {
    out << "tree " << tree.size() << ' ' << tree.root() << '\n';
    for (const auto& node : tree.nodes()) {
      if (node.parent) {
        out << *node.parent;
      } else {
        out << '-';
      }
      out << '\t' << node.label << '\n';
    }
  }
  const auto& opt = index.options();
  out << "index " << index.bucket_count() << ' ' << index.entry_count() << ' ' << opt.max_kicks << ' '
      << detail::format_double(opt.grow_threshold) << ' ' << (opt.expansion_enabled ? 1 : 0) << ' '
      << (opt.sorting_enabled ? 1 : 0) << ' ' << opt.seed << '\n';
  index.for_each_entry([&](std::size_t, std::size_t, const BucketEntry& e) {
    const auto& head = index.head(e.head);
    out << head.temperature << '\t' << head.label << '\t';
    bool first = true;
    for (const auto& a : index.addresses(e.head)) {
      if (!first) out << ',';
      first = false;
      out << a.tree << ':' << a.node;
    }
    out << '\n';
  });
  out << "end\n";
  if (!out) throw IoError("failed to write snapshot");
}

inline Snapshot read_snapshot(std::istream& in, const std::string& path = "<stream>") {
  detail::LineReader r(in, path);

  {
    const auto header = r.next("snapshot header");
    const auto w = r.words(header);
    if (w.size() != 2 || w[0] != "cftrag-snapshot") r.fail("not a cftrag snapshot");
    if (r.number<int>(w[1], "version") != kSnapshotVersion) r.fail("unsupported snapshot version");
  }

  Forest forest;
  {
    const auto line = r.next("forest header");
    const auto w = r.words(line);
    if (w.size() != 2 || w[0] != "forest") r.fail("expected 'forest <count>'");
    const auto trees = r.number<std::size_t>(w[1], "tree count");
    for (std::size_t t = 0; t < trees; ++t) {
      const auto tl = r.next("tree header");
      const auto tw = r.words(tl);
      if (tw.size() != 3 || tw[0] != "tree") r.fail("expected 'tree <nodes> <root>'");
      const auto count = r.number<std::uint32_t>(tw[1], "node count");
      const auto root = r.number<std::uint32_t>(tw[2], "root");
      std::vector<TreeNode> nodes(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        const auto nl = r.next("node line");
        const auto tab = nl.find('\t');
        if (tab == std::string::npos) r.fail("expected '<parent>\\t<label>'");
        const std::string_view pf = std::string_view(nl).substr(0, tab);
        nodes[i].label = nl.substr(tab + 1);
        if (pf != "-") {
          const auto p = r.number<std::uint32_t>(pf, "parent index");
          if (p >= count || p == i) r.fail("parent index out of range");
          nodes[i].parent = p;
        }
      }
      if (count > 0 && (root >= count || nodes[root].parent)) r.fail("invalid root");
      for (std::uint32_t i = 0; i < count; ++i) {
        if (nodes[i].parent) {
          nodes[*nodes[i].parent].children.push_back(i);
        } else if (i != root) {
          r.fail("tree has more than one root");
        }
      }
      forest.add_tree(make_tree(std::move(nodes), root));
    }
  }

  const auto il = r.next("index header");
  const auto iw = r.words(il);
  if (iw.size() != 8 || iw[0] != "index") r.fail("expected index header with 7 fields");
  IndexOptions opt;
  opt.initial_buckets = r.number<std::size_t>(iw[1], "bucket count");
  const auto entities = r.number<std::size_t>(iw[2], "entity count");
  opt.max_kicks = r.number<std::size_t>(iw[3], "max kicks");
  opt.grow_threshold = r.number<double>(iw[4], "grow threshold");
  opt.expansion_enabled = r.number<int>(iw[5], "expansion flag") != 0;
  opt.sorting_enabled = r.number<int>(iw[6], "sorting flag") != 0;
  opt.seed = r.number<std::uint64_t>(iw[7], "seed");

  CuckooIndex index = [&] {
    try {
      return CuckooIndex(opt);
    } catch (const std::invalid_argument& e) {
      r.fail(e.what());
    }
  }();

  for (std::size_t e = 0; e < entities; ++e) {
    const auto line = r.next("entity line");
    const auto f = r.words(line, '\t');
    if (f.size() != 3) r.fail("expected '<temperature>\\t<label>\\t<addresses>'");
    const auto temperature = r.number<std::uint64_t>(f[0], "temperature");
    std::vector<NodeAddress> addrs;
    for (auto item : r.words(f[2], ',')) {
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) r.fail("address must be <tree>:<node>");
      NodeAddress a{r.number<std::uint32_t>(item.substr(0, colon), "tree index"),
                    r.number<std::uint32_t>(item.substr(colon + 1), "node index")};
      if (!forest.contains(a)) r.fail(Forest::describe(a) + " is outside the stored forest");
      addrs.push_back(a);
    }
    const std::string label(f[1]);
    if (index.insert(label, addrs) != InsertOutcome::Inserted) r.fail("duplicate or unplaceable entity '" + label + "'");
    index.set_temperature(*index.find(label), temperature);
  }
  if (r.next("end marker") != "end") r.fail("expected 'end'");
  return Snapshot{std::move(forest), std::move(index)};
}

template <std::size_t S, std::size_t B>
void save_snapshot(const std::string& path, const Forest& forest, const BasicCuckooIndex<S, B>& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open snapshot '" + path + "' for writing");
  write_snapshot(out, forest, index);
  out.flush();
  if (!out) throw IoError("failed writing snapshot '" + path + "'");
}

inline Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open snapshot '" + path + "'");
  return read_snapshot(in, path);
}

}  // namespace cftrag
