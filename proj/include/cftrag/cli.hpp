#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "cftrag/baselines.hpp"
#include "cftrag/bench.hpp"
#include "cftrag/cuckoo_index.hpp"
#include "cftrag/error.hpp"
#include "cftrag/forest.hpp"
#include "cftrag/retrieval.hpp"
#include "cftrag/snapshot.hpp"

namespace cftrag::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIo = 3,
  kData = 4,
  kInternal = 5,
};

struct CliConfig {
  std::string input;
  std::string snapshot;
  std::string output;
  std::string template_path;
  std::string system_prompt{kDefaultSystemPrompt};
  std::size_t n = kDefaultContextDepth;
  std::string algo = "cuckoo";
  std::uint64_t seed = 1;
  std::size_t rounds = 100;
  std::size_t probes = 100000;
  bool no_sort = false;
};

/// One query per line: tab-separated entity labels. '#' lines and blank lines are skipped.
inline std::vector<Query> read_queries(std::istream& in) {
  std::vector<Query> queries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    Query q;
    std::unordered_set<std::string> seen;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      auto label = normalize_label(std::string_view(line).substr(start, tab - start));
      if (!label.empty() && seen.insert(label).second) q.push_back(std::move(label));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (q.empty()) continue;
    queries.push_back(std::move(q));
  }
  return queries;
}

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  auto text = ss.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

inline std::string sibling_path(const std::string& path, const std::string& tag) {
  std::filesystem::path p(path);
  auto ext = p.extension().string();
  if (ext.empty()) ext = ".csv";
  p.replace_extension();
  return p.string() + "." + tag + ext;
}

inline void print_summary(std::ostream& out, const BenchReport& report) {
  struct Key {
    Algorithm a;
    std::size_t trees, epq;
    bool operator==(const Key&) const = default;
  };
  std::vector<Key> keys;
  for (const auto& r : report.rows) {
    Key k{r.algorithm, r.tree_count, r.entities_per_query};
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  }
  out << std::left << std::setw(8) << "algo" << std::setw(8) << "trees" << std::setw(10) << "entities"
      << std::setw(16) << "mean_ns" << "correct\n";
  for (const auto& k : keys) {
    bool correct = true;
    for (const auto& r : report.rows) {
      if (r.algorithm == k.a && r.tree_count == k.trees && r.entities_per_query == k.epq) correct &= r.correct;
    }
    out << std::setw(8) << to_string(k.a) << std::setw(8) << k.trees << std::setw(10) << k.epq << std::setw(16)
        << std::fixed << std::setprecision(1) << mean_over_rounds(report, k.a, k.trees, k.epq, 1)
        << (correct ? "true" : "false") << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

inline int cmd_build(const CliConfig& c, std::ostream& out) {
  auto tuples = read_relations_file(c.input);
  auto filtered = filter_relations(tuples);
  Forest forest = build_forest(filtered);
  IndexOptions opt;
  opt.seed = c.seed;
  opt.sorting_enabled = !c.no_sort;
  CuckooIndex index = build_index(forest, opt);
  save_snapshot(c.snapshot, forest, index);
  const auto s = index.stats();
  out << "relations " << tuples.size() << " kept " << filtered.size() << '\n'
      << "trees " << forest.tree_count() << " nodes " << forest.node_count() << '\n'
      << "entities " << s.entry_count << " buckets " << s.bucket_count << " load_factor "
      << std::setprecision(4) << std::fixed << s.load_factor << '\n';
  out.unsetf(std::ios::floatfield);
  return kOk;
}

inline int cmd_query(const CliConfig& c, std::ostream& out) {
  Snapshot snap = load_snapshot(c.snapshot);
  std::ifstream qin(c.input);
  if (!qin) throw IoError("cannot open query file '" + c.input + "'");
  const auto queries = read_queries(qin);

  std::string tmpl(kDefaultTemplate);
  if (!c.template_path.empty()) tmpl = read_text_file(c.template_path);
  validate_template(tmpl);

  const auto algo = parse_algorithm(c.algo);
  std::optional<BloomAnnotatedForest> annotated;
  if (algo == Algorithm::Bloom || algo == Algorithm::Bloom2) annotated.emplace(snap.forest, BloomParams{});

  std::ostringstream rendered;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    ContextBundle bundle;
    if (algo == Algorithm::Cuckoo) {
      bundle = generate_context(snap.index, snap.forest, q, c.n);
    } else {
      auto locate = [&](const std::string& label) -> std::optional<std::vector<NodeAddress>> {
        std::vector<NodeAddress> found;
        if (algo == Algorithm::Naive) found = naive_locate(snap.forest, label);
        if (algo == Algorithm::Bloom) found = bloom_locate(*annotated, label);
        if (algo == Algorithm::Bloom2) found = improved_bloom_locate(*annotated, label);
        if (found.empty()) return std::nullopt;
        return found;
      };
      bundle = generate_context_with(locate, snap.forest, q, c.n);
    }
    if (i > 0) rendered << '\n';
    rendered << render_prompt(bundle, c.system_prompt, tmpl);
  }

  if (c.output.empty()) {
    out << rendered.str();
  } else {
    std::ofstream f(c.output, std::ios::binary);
    if (!f) throw IoError("cannot open output '" + c.output + "'");
    f << rendered.str();
    if (!f) throw IoError("failed writing '" + c.output + "'");
  }
  return kOk;
}

inline BenchConfig bench_config(const CliConfig& c, const CLI::App& sub) {
  BenchConfig cfg = load_bench_config(c.input);
  if (sub.count("--seed")) cfg.seed = c.seed;
  if (sub.count("--rounds")) cfg.rounds = c.rounds;
  if (sub.count("--algo")) cfg.algorithms = {*parse_algorithm(c.algo)};
  if (c.no_sort) cfg.sorting = false;
  return cfg;
}

inline int cmd_bench(const CliConfig& c, const CLI::App& sub, std::ostream& out) {
  const auto cfg = bench_config(c, sub);
  const auto report = run_config(cfg);
  write_report(report, c.output);
  print_summary(out, report);
  if (!report.all_correct()) throw InvariantError("a retriever returned a result that differs from the oracle");
  return kOk;
}

inline int cmd_ablate(const CliConfig& c, const CLI::App& sub, std::ostream& out) {
  auto cfg = bench_config(c, sub);
  if (!sub.count("--algo")) cfg.algorithms = {Algorithm::Cuckoo};
  for (bool sorting : {true, false}) {
    cfg.sorting = sorting;
    const auto report = run_config(cfg);
    const auto path = sibling_path(c.output, sorting ? "sort_on" : "sort_off");
    write_report(report, path);
    out << "sorting " << (sorting ? "on" : "off") << " -> " << path << '\n';
    for (auto trees : cfg.tree_counts) {
      for (auto epq : cfg.entities_per_query) {
        for (auto a : cfg.algorithms) {
          const double r1 = mean_over_rounds(report, a, trees, epq, 1, 1);
          const double rest = cfg.rounds > 1 ? mean_over_rounds(report, a, trees, epq, 2) : r1;
          out << "  " << to_string(a) << " trees=" << trees << " entities=" << epq << " round1_ns=" << std::fixed
              << std::setprecision(1) << r1 << " round2plus_ns=" << rest << '\n';
          out.unsetf(std::ios::floatfield);
        }
      }
    }
    if (!report.all_correct()) throw InvariantError("a retriever returned a result that differs from the oracle");
  }
  return kOk;
}

inline int cmd_fprate(const CliConfig& c, std::ostream& out) {
  const auto r = fp_rate_experiment(FpExperimentParams{}, c.probes, c.seed);
  std::ostringstream text;
  text << "inserted=" << r.inserted << '\n'
       << "failed=" << r.failed << '\n'
       << "load_factor=" << cftrag::detail::format_double(r.load_factor) << '\n'
       << "probes=" << r.probes << '\n'
       << "fingerprint_matches=" << r.fingerprint_matches << '\n'
       << "rate=" << cftrag::detail::format_double(r.rate) << '\n'
       << "wrong_results=" << r.wrong_results << '\n';
  out << text.str();
  if (!c.output.empty()) {
    std::ofstream f(c.output, std::ios::binary);
    if (!f) throw IoError("cannot open output '" + c.output + "'");
    f << text.str();
  }
  return kOk;
}

}  // namespace detail

/// Entry point shared by the `cftrag` binary and the tests.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CliConfig c;
  CLI::App app{"Entity-forest retrieval with an improved cuckoo filter", "cftrag"};
  app.require_subcommand(1);

  auto* build = app.add_subcommand("build", "Ingest a relation file and write a forest + index snapshot");
  build->add_option("--input", c.input, "Relation tuples: tree_id<TAB>parent<TAB>child")->required();
  build->add_option("--snapshot,--output", c.snapshot, "Snapshot file to write")->required();
  build->add_option("--seed", c.seed, "Seed for kick-out victim selection");
  build->add_flag("--no-sort", c.no_sort, "Disable temperature ordering of buckets");

  auto* query = app.add_subcommand("query", "Render context prompts for pre-tokenized queries");
  query->add_option("--snapshot", c.snapshot, "Snapshot written by 'build'")->required();
  query->add_option("--input", c.input, "Queries: one per line, tab-separated entity labels")->required();
  query->add_option("--output", c.output, "Write prompts here instead of stdout");
  query->add_option("--n", c.n, "Ancestors/descendants per occurrence")->check(CLI::PositiveNumber);
  query->add_option("--algo", c.algo, "Retriever")->check(CLI::IsMember({"naive", "bloom", "bloom2", "cuckoo"}));
  query->add_option("--template", c.template_path, "Template file with {entity}, {up}, {down}");
  query->add_option("--system-prompt", c.system_prompt, "System prompt text");

  auto add_bench_flags = [&](CLI::App* sub) {
    sub->add_option("--input", c.input, "key=value bench config")->required();
    sub->add_option("--output", c.output, "CSV report path")->required();
    sub->add_option("--seed", c.seed, "Master seed (overrides config)");
    sub->add_option("--rounds", c.rounds, "Rounds per configuration (overrides config)")->check(CLI::PositiveNumber);
    sub->add_option("--algo", c.algo, "Run a single retriever")
        ->check(CLI::IsMember({"naive", "bloom", "bloom2", "cuckoo"}));
    sub->add_flag("--no-sort", c.no_sort, "Disable temperature ordering of buckets");
  };
  auto* bench = app.add_subcommand("bench", "Run the retrieval benchmark and write a CSV report");
  add_bench_flags(bench);
  auto* ablate = app.add_subcommand("ablate", "Run the benchmark with bucket sorting on and off");
  add_bench_flags(ablate);

  auto* fprate = app.add_subcommand("fprate", "Measure the raw fingerprint false-positive rate");
  fprate->add_option("--seed", c.seed, "Seed");
  fprate->add_option("--probes", c.probes, "Absent-key probes")->check(CLI::Range(std::size_t{1}, std::size_t(1) << 40));
  fprate->add_option("--output", c.output, "Also write the result as key=value lines");

  if (args.empty()) {
    err << app.help();
    return kUsage;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  }

  try {
    if (*build) return detail::cmd_build(c, out);
    if (*query) return detail::cmd_query(c, out);
    if (*bench) return detail::cmd_bench(c, *bench, out);
    if (*ablate) return detail::cmd_ablate(c, *ablate, out);
    if (*fprate) return detail::cmd_fprate(c, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  err << app.help();
  return kUsage;
}

}  // namespace cftrag::cli
