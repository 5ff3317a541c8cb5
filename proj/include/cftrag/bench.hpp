#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cftrag/baselines.hpp"
#include "cftrag/cuckoo_index.hpp"
#include "cftrag/error.hpp"
#include "cftrag/forest.hpp"
#include "cftrag/hash.hpp"
#include "cftrag/text_io.hpp"

namespace cftrag {

// ---------------------------------------------------------------------------
// Synthetic forests

struct ForestSpec {
  std::size_t tree_count = 600;
  std::size_t nodes_per_tree = 100;
  std::size_t max_branching = 4;
  std::size_t label_vocabulary_size = 5000;
  double cross_tree_overlap = 0.5;  // probability a node draws its label from the shared vocabulary
  std::uint64_t seed = 1;

  void validate() const {
    if (tree_count == 0 || nodes_per_tree == 0 || max_branching == 0 || label_vocabulary_size == 0) {
      throw std::invalid_argument("forest spec counts must be positive");
    }
    if (!(cross_tree_overlap >= 0.0 && cross_tree_overlap <= 1.0)) {
      throw std::invalid_argument("cross_tree_overlap must be in [0, 1]");
    }
  }
};

inline std::string vocabulary_label(std::size_t i) { return "entity_" + std::to_string(i); }

/// Random recursive trees: node i attaches to a uniformly chosen earlier node
/// that still has fewer than max_branching children. Each node takes a shared
/// vocabulary label with probability cross_tree_overlap, otherwise a label
/// unique to that (tree, node).
inline Forest synth_forest(const ForestSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> vocab(0, spec.label_vocabulary_size - 1);

  auto draw_label = [&](std::size_t t, std::size_t i) {
    if (coin(rng) < spec.cross_tree_overlap) return vocabulary_label(vocab(rng));
    return "t" + std::to_string(t) + "_n" + std::to_string(i);
  };

  Forest forest;
  std::vector<std::uint32_t> open;
  std::vector<std::size_t> fanout;
  for (std::size_t t = 0; t < spec.tree_count; ++t) {
    Tree tree;
    tree.add_root(draw_label(t, 0));
    open.assign(1, 0);
    fanout.assign(1, 0);
    for (std::size_t i = 1; i < spec.nodes_per_tree; ++i) {
      std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
      const auto slot = pick(rng);
      const auto parent = open[slot];
      const auto id = tree.add_child(parent, draw_label(t, i));
      if (++fanout[parent] == spec.max_branching) {
        open[slot] = open.back();
        open.pop_back();
      }
      open.push_back(id);
      fanout.push_back(0);
    }
    forest.add_tree(std::move(tree));
  }
  return forest;
}

// ---------------------------------------------------------------------------
// Workloads

struct WorkloadSpec {
  std::size_t query_count = 20;
  std::size_t entities_per_query = 5;
  double skew = 0.0;  // Zipf exponent over popularity rank; 0 is uniform
  std::uint64_t seed = 2;

  void validate() const {
    if (entities_per_query == 0) throw std::invalid_argument("entities_per_query must be at least 1");
    if (!(skew >= 0.0)) throw std::invalid_argument("skew must be non-negative");
  }
};

using Query = std::vector<std::string>;

/// Labels ordered by popularity: occurrence count descending, then first appearance.
inline std::vector<std::string> labels_by_popularity(const Forest& forest) {
  auto occ = label_occurrences(forest);
  std::stable_sort(occ.begin(), occ.end(),
                   [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });
  std::vector<std::string> out;
  out.reserve(occ.size());
  for (auto& [label, addrs] : occ) out.push_back(std::move(label));
  return out;
}

/// Each query is a set of distinct labels present in the forest, sampled
/// without replacement with weight 1/(rank+1)^skew.
inline std::vector<Query> gen_workload(const Forest& forest, const WorkloadSpec& spec) {
  spec.validate();
  const auto labels = labels_by_popularity(forest);
  if (labels.empty()) throw std::invalid_argument("cannot build a workload over an empty forest");
  const auto per_query = std::min(spec.entities_per_query, labels.size());

  // Weighted sampling without replacement via exponential keys: the
  // `per_query` smallest of Exp(1)/w are a weighted sample.
  std::vector<double> inv_weight(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) inv_weight[r] = std::pow(static_cast<double>(r + 1), spec.skew);

  std::mt19937_64 rng(spec.seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<Query> queries;
  queries.reserve(spec.query_count);
  using Keyed = std::pair<double, std::size_t>;
  for (std::size_t q = 0; q < spec.query_count; ++q) {
    std::priority_queue<Keyed> best;  // max-heap of the current smallest keys
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const double key = expo(rng) * inv_weight[r];
      if (best.size() < per_query) {
        best.emplace(key, r);
      } else if (key < best.top().first) {
        best.pop();
        best.emplace(key, r);
      }
    }
    std::vector<Keyed> picked;
    while (!best.empty()) {
      picked.push_back(best.top());
      best.pop();
    }
    std::sort(picked.begin(), picked.end());
    Query query;
    for (const auto& [key, r] : picked) query.push_back(labels[r]);
    queries.push_back(std::move(query));
  }
  return queries;
}

// ---------------------------------------------------------------------------
// Harness

enum class Algorithm { Naive, Bloom, Bloom2, Cuckoo };

inline constexpr std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::Naive: return "naive";
    case Algorithm::Bloom: return "bloom";
    case Algorithm::Bloom2: return "bloom2";
    case Algorithm::Cuckoo: return "cuckoo";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) noexcept {
  for (auto a : {Algorithm::Naive, Algorithm::Bloom, Algorithm::Bloom2, Algorithm::Cuckoo}) {
    if (s == to_string(a)) return a;
  }
  return std::nullopt;
}

struct BenchRow {
  Algorithm algorithm = Algorithm::Naive;
  std::size_t tree_count = 0;
  std::size_t entities_per_query = 0;
  std::size_t round = 0;  // 1-based
  double mean_time_ns = 0.0;
  double p95_time_ns = 0.0;
  std::uint64_t visits = 0;  // node visits + filter probes (baselines) or slots examined (cuckoo), per round
  bool correct = true;

  friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  void append(const BenchReport& other) { rows.insert(rows.end(), other.rows.begin(), other.rows.end()); }
  bool all_correct() const {
    return std::all_of(rows.begin(), rows.end(), [](const BenchRow& r) { return r.correct; });
  }
};

struct BenchOptions {
  std::vector<Algorithm> algorithms{Algorithm::Naive, Algorithm::Bloom, Algorithm::Bloom2, Algorithm::Cuckoo};
  std::size_t rounds = 100;
  bool sorting_enabled = true;
  IndexOptions index;
  BloomParams bloom;
};

namespace detail {

inline double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

inline double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (auto v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace detail

/// Times only the retrieval step (index and filter construction happen
/// first). Rounds replay the same workload so temperature effects show up
/// from round 2 on. Within a round the algorithms run one after another in an
/// order that rotates every round, so cache state left by one retriever does
/// not always penalize the same successor. Every result is checked against the
/// brute-force oracle outside the timed region.
inline BenchReport run_benchmark(const Forest& forest, std::span<const Query> workload, const BenchOptions& options) {
  if (options.rounds == 0) throw std::invalid_argument("rounds must be positive");
  const LabelIndex oracle = build_label_index(forest);
  const std::vector<NodeAddress> none;
  auto expected = [&](const std::string& label) -> const std::vector<NodeAddress>& {
    auto it = oracle.find(label);
    return it == oracle.end() ? none : it->second;
  };

  const auto& algos = options.algorithms;
  const std::size_t entities_per_query = workload.empty() ? 0 : workload.front().size();

  std::optional<BloomAnnotatedForest> annotated;
  std::optional<CuckooIndex> index;
  for (auto algo : algos) {
    if ((algo == Algorithm::Bloom || algo == Algorithm::Bloom2) && !annotated) annotated.emplace(forest, options.bloom);
    if (algo == Algorithm::Cuckoo && !index) {
      auto opt = options.index;
      opt.sorting_enabled = options.sorting_enabled;
      index.emplace(build_index(forest, opt));
    }
  }

  auto locate = [&](Algorithm algo, const std::string& label, LocateStats& stats) -> std::vector<NodeAddress> {
    switch (algo) {
      case Algorithm::Naive: return naive_locate(forest, label, &stats);
      case Algorithm::Bloom: return bloom_locate(*annotated, label, &stats);
      case Algorithm::Bloom2: return improved_bloom_locate(*annotated, label, &stats);
      case Algorithm::Cuckoo: {
        auto head = index->lookup_and_touch(label, &stats);
        return head ? index->addresses(*head) : std::vector<NodeAddress>{};
      }
    }
    return {};
  };

  std::vector<std::vector<BenchRow>> rows(algos.size());
  std::vector<std::vector<NodeAddress>> results;
  std::vector<double> times;
  for (std::size_t round = 1; round <= options.rounds; ++round) {
    for (std::size_t k = 0; k < algos.size(); ++k) {
      const auto slot = (k + round - 1) % algos.size();
      const auto algo = algos[slot];
      times.clear();
      LocateStats stats;
      bool correct = true;
      for (const auto& query : workload) {
        results.resize(query.size());
        const auto start = std::chrono::steady_clock::now();
        for (std::size_t e = 0; e < query.size(); ++e) results[e] = locate(algo, query[e], stats);
        const auto stop = std::chrono::steady_clock::now();
        times.push_back(static_cast<double>(std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count()));

        for (std::size_t e = 0; e < query.size(); ++e) {
          auto& got = results[e];
          std::sort(got.begin(), got.end());
          if (got != expected(query[e])) correct = false;
        }
      }
      rows[slot].push_back(BenchRow{algo, forest.tree_count(), entities_per_query, round, detail::mean(times),
                                    detail::percentile_nearest_rank(times, 0.95), stats.visits + stats.probes,
                                    correct});
    }
  }

  BenchReport report;
  for (auto& per_algo : rows) report.rows.insert(report.rows.end(), per_algo.begin(), per_algo.end());
  return report;
}

/// Mean of the per-round means for rounds in [first, last] of one algorithm/configuration.
inline double mean_over_rounds(const BenchReport& report, Algorithm algo, std::size_t tree_count,
                               std::size_t entities_per_query, std::size_t first_round,
                               std::size_t last_round = std::numeric_limits<std::size_t>::max()) {
  std::vector<double> v;
  for (const auto& r : report.rows) {
    if (r.algorithm == algo && r.tree_count == tree_count && r.entities_per_query == entities_per_query &&
        r.round >= first_round && r.round <= last_round) {
      v.push_back(r.mean_time_ns);
    }
  }
  if (v.empty()) throw std::invalid_argument("no rows match the requested configuration");
  return detail::mean(v);
}

// ---------------------------------------------------------------------------
// CSV report

inline constexpr std::string_view kReportHeader =
    "algorithm,tree_count,entities_per_query,round,mean_time_ns,p95_time_ns,visits,correct";

inline void write_report(std::ostream& out, const BenchReport& report) {
  out << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    out << to_string(r.algorithm) << ',' << r.tree_count << ',' << r.entities_per_query << ',' << r.round << ','
        << detail::format_double(r.mean_time_ns) << ',' << detail::format_double(r.p95_time_ns) << ',' << r.visits
        << ',' << (r.correct ? "true" : "false") << '\n';
  }
}

inline void write_report(const BenchReport& report, const std::string& path) {
  if (report.rows.empty()) throw std::invalid_argument("refusing to write an empty report");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open report '" + path + "' for writing");
  write_report(out, report);
  out.flush();
  if (!out) throw IoError("failed writing report '" + path + "'");
}

inline BenchReport read_report(std::istream& in, const std::string& path = "<stream>") {
  detail::LineReader r(in, path);
  if (r.next("report header") != kReportHeader) r.fail("unexpected report header");
  BenchReport report;
  std::string line;
  while (in.peek() != std::char_traits<char>::eof()) {
    line = r.next("report row");
    if (line.empty()) continue;
    const auto f = r.words(line, ',');
    if (f.size() != 8) r.fail("expected 8 columns");
    BenchRow row;
    const auto algo = parse_algorithm(f[0]);
    if (!algo) r.fail("unknown algorithm '" + std::string(f[0]) + "'");
    row.algorithm = *algo;
    row.tree_count = r.number<std::size_t>(f[1], "tree_count");
    row.entities_per_query = r.number<std::size_t>(f[2], "entities_per_query");
    row.round = r.number<std::size_t>(f[3], "round");
    row.mean_time_ns = r.number<double>(f[4], "mean_time_ns");
    row.p95_time_ns = r.number<double>(f[5], "p95_time_ns");
    row.visits = r.number<std::uint64_t>(f[6], "visits");
    if (f[7] == "true") {
      row.correct = true;
    } else if (f[7] == "false") {
      row.correct = false;
    } else {
      r.fail("correct must be true or false");
    }
    report.rows.push_back(row);
  }
  return report;
}

// ---------------------------------------------------------------------------
// False-positive experiment

struct FpExperimentParams {
  std::size_t buckets = 1024;
  std::size_t entities = 3148;
};

struct FpRateResult {
  std::size_t inserted = 0;
  std::size_t failed = 0;
  double load_factor = 0.0;
  std::size_t probes = 0;
  std::size_t fingerprint_matches = 0;  // absent keys whose fingerprint matched some slot
  std::size_t wrong_results = 0;        // absent keys reported found, or found with a different label
  double rate = 0.0;
};

/// Fills an index (expansion disabled) with random labels, then probes with
/// labels known to be absent and counts raw fingerprint matches.
inline FpRateResult fp_rate_experiment(const FpExperimentParams& params, std::size_t probes, std::uint64_t seed) {
  IndexOptions opt;
  opt.initial_buckets = params.buckets;
  opt.expansion_enabled = false;
  opt.seed = seed;
  CuckooIndex index(opt);

  std::mt19937_64 rng(seed);
  auto token = [&] {
    char buf[17];
    auto [end, ec] = std::to_chars(buf, buf + 16, rng(), 16);
    return std::string(buf, end);
  };

  FpRateResult result;
  const NodeAddress addr{0, 0};
  for (std::size_t i = 0; i < params.entities; ++i) {
    const auto outcome = index.insert("present:" + token(), std::span(&addr, 1));
    if (outcome == InsertOutcome::Inserted) ++result.inserted;
    if (outcome == InsertOutcome::Failed) ++result.failed;
  }
  result.load_factor = index.load_factor();

  result.probes = probes;
  for (std::size_t i = 0; i < probes; ++i) {
    const auto label = "absent:" + token();
    if (index.fingerprint_matches(label)) ++result.fingerprint_matches;
    if (index.find(label)) ++result.wrong_results;
  }
  result.rate = probes == 0 ? 0.0 : static_cast<double>(result.fingerprint_matches) / static_cast<double>(probes);
  return result;
}

// ---------------------------------------------------------------------------
// key=value bench configuration

struct BenchConfig {
  std::vector<std::size_t> tree_counts{50, 300, 600};
  std::size_t nodes_per_tree = 100;
  std::size_t max_branching = 4;
  std::size_t vocabulary = 5000;
  double overlap = 0.5;
  std::size_t queries = 20;
  std::vector<std::size_t> entities_per_query{5};
  double skew = 0.0;
  std::size_t rounds = 100;
  std::vector<Algorithm> algorithms{Algorithm::Naive, Algorithm::Bloom, Algorithm::Bloom2, Algorithm::Cuckoo};
  bool sorting = true;
  std::size_t bits_per_element = 10;
  unsigned bloom_k = 4;
  std::uint64_t seed = 1;
};

inline BenchConfig parse_bench_config(std::istream& in, const std::string& path = "<stream>") {
  BenchConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  auto fail = [&](const std::string& what) { throw ParseError(path, lineno, what); };
  auto num = [&]<typename T>(std::string_view v, T) {
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) fail("bad number '" + std::string(v) + "'");
    return out;
  };
  auto list = [&](std::string_view v) {
    std::vector<std::string_view> items;
    std::size_t start = 0;
    while (true) {
      const auto pos = v.find(',', start);
      items.push_back(trim(v.substr(start, pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    return items;
  };
  auto positive = [&](std::size_t v, const char* key) {
    if (v == 0) fail(std::string(key) + " must be positive");
    return v;
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto eq = content.find('=');
    if (eq == std::string_view::npos) fail("expected key=value");
    const auto key = trim(content.substr(0, eq));
    const auto value = trim(content.substr(eq + 1));

    if (key == "tree_counts") {
      cfg.tree_counts.clear();
      for (auto item : list(value)) cfg.tree_counts.push_back(positive(num(item, std::size_t{}), "tree_counts"));
    } else if (key == "nodes_per_tree") {
      cfg.nodes_per_tree = positive(num(value, std::size_t{}), "nodes_per_tree");
    } else if (key == "max_branching") {
      cfg.max_branching = positive(num(value, std::size_t{}), "max_branching");
    } else if (key == "vocabulary") {
      cfg.vocabulary = positive(num(value, std::size_t{}), "vocabulary");
    } else if (key == "overlap") {
      cfg.overlap = num(value, double{});
      if (!(cfg.overlap >= 0.0 && cfg.overlap <= 1.0)) fail("overlap must be in [0, 1]");
    } else if (key == "queries") {
      cfg.queries = positive(num(value, std::size_t{}), "queries");
    } else if (key == "entities_per_query") {
      cfg.entities_per_query.clear();
      for (auto item : list(value)) {
        cfg.entities_per_query.push_back(positive(num(item, std::size_t{}), "entities_per_query"));
      }
    } else if (key == "skew") {
      cfg.skew = num(value, double{});
      if (!(cfg.skew >= 0.0)) fail("skew must be non-negative");
    } else if (key == "rounds") {
      cfg.rounds = positive(num(value, std::size_t{}), "rounds");
    } else if (key == "algorithms") {
      cfg.algorithms.clear();
      for (auto item : list(value)) {
        auto a = parse_algorithm(item);
        if (!a) fail("unknown algorithm '" + std::string(item) + "'");
        cfg.algorithms.push_back(*a);
      }
    } else if (key == "sorting") {
      if (value == "true" || value == "1") {
        cfg.sorting = true;
      } else if (value == "false" || value == "0") {
        cfg.sorting = false;
      } else {
        fail("sorting must be true or false");
      }
    } else if (key == "bits_per_element") {
      cfg.bits_per_element = positive(num(value, std::size_t{}), "bits_per_element");
    } else if (key == "bloom_k") {
      cfg.bloom_k = static_cast<unsigned>(positive(num(value, std::size_t{}), "bloom_k"));
    } else if (key == "seed") {
      cfg.seed = num(value, std::uint64_t{});
    } else {
      fail("unknown key '" + std::string(key) + "'");
    }
  }
  if (cfg.tree_counts.empty() || cfg.entities_per_query.empty() || cfg.algorithms.empty()) {
    fail("tree_counts, entities_per_query and algorithms must not be empty");
  }
  return cfg;
}

inline BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open bench config '" + path + "'");
  return parse_bench_config(in, path);
}

/// Runs every (tree_count, entities_per_query) cell of the config. All seeds
/// derive from cfg.seed.
inline BenchReport run_config(const BenchConfig& cfg) {
  BenchReport report;
  for (auto trees : cfg.tree_counts) {
    const ForestSpec fspec{trees, cfg.nodes_per_tree, cfg.max_branching, cfg.vocabulary, cfg.overlap,
                           mix64(cfg.seed ^ (0x100000000ULL + trees))};
    const Forest forest = synth_forest(fspec);
    for (auto epq : cfg.entities_per_query) {
      const WorkloadSpec wspec{cfg.queries, epq, cfg.skew, mix64(cfg.seed ^ (0x200000000ULL + trees * 1000 + epq))};
      const auto workload = gen_workload(forest, wspec);
      BenchOptions opt;
      opt.algorithms = cfg.algorithms;
      opt.rounds = cfg.rounds;
      opt.sorting_enabled = cfg.sorting;
      opt.index.seed = mix64(cfg.seed ^ 0x300000000ULL);
      opt.bloom = BloomParams{cfg.bits_per_element, cfg.bloom_k};
      report.append(run_benchmark(forest, workload, opt));
    }
  }
  return report;
}

}  // namespace cftrag
