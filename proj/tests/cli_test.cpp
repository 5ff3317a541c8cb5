#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cftrag/cli.hpp"

namespace fs = std::filesystem;
using cftrag::cli::run_cli;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cftrag_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run_cli(args, out_, err_);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(Cli, NoArgumentsPrintsUsage) {
  EXPECT_EQ(run({}), 2);
  EXPECT_NE(err_.str().find("Usage"), std::string::npos);
}

TEST_F(Cli, UnknownCommandIsUsageError) {
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"build", "--input", "x"}), 2);  // --snapshot missing
}

TEST_F(Cli, BuildThenQuery) {
  const auto rel = write("r.tsv", "0\tA\tB\n0\tB\tC\n0\tA\tC\n");
  const auto snap = path("s.snap");
  ASSERT_EQ(run({"build", "--input", rel, "--snapshot", snap}), 0) << err_.str();
  EXPECT_NE(out_.str().find("kept 2"), std::string::npos) << out_.str();

  const auto q = write("q.tsv", "B\n");
  ASSERT_EQ(run({"query", "--snapshot", snap, "--input", q, "--n", "3"}), 0) << err_.str();
  const auto prompt = out_.str();
  EXPECT_NE(prompt.find("The upward hierarchical relationship of entity B are: A."), std::string::npos) << prompt;
  EXPECT_NE(prompt.find("The downward hierarchical relationship of entity B are: C."), std::string::npos);
  EXPECT_EQ(prompt.substr(prompt.size() - 2), "B\n");

  ASSERT_EQ(run({"query", "--snapshot", snap, "--input", q}), 0);
  EXPECT_EQ(out_.str(), prompt);  // byte-identical reruns

  for (const char* algo : {"naive", "bloom", "bloom2"}) {
    ASSERT_EQ(run({"query", "--snapshot", snap, "--input", q, "--algo", algo}), 0);
    EXPECT_EQ(out_.str(), prompt) << algo;
  }
}

TEST_F(Cli, QueryWithTemplateAndOutputFile) {
  const auto rel = write("r.tsv", "0\tA\tB\n");
  const auto snap = path("s.snap");
  ASSERT_EQ(run({"build", "--input", rel, "--output", snap}), 0);
  const auto q = write("q.tsv", "A\tmissing\n");
  const auto t = write("t.txt", "{entity}: up={up} down={down}");
  const auto o = path("prompt.txt");
  ASSERT_EQ(run({"query", "--snapshot", snap, "--input", q, "--template", t, "--system-prompt", "SYS", "--output", o}),
            0);
  EXPECT_EQ(slurp(o), "SYS\nA: up=none down=B\nA missing\n");

  const auto bad = write("bad.txt", "{entity} only");
  EXPECT_EQ(run({"query", "--snapshot", snap, "--input", q, "--template", bad}), 4);
}

TEST_F(Cli, BenchSmoke) {
  const auto csv = path("r.csv");
  ASSERT_EQ(run({"bench", "--input", CFTRAG_DATA_DIR "/small_bench.conf", "--output", csv, "--rounds", "2"}), 0)
      << err_.str();
  std::ifstream in(csv);
  const auto report = cftrag::read_report(in, csv);
  EXPECT_FALSE(report.rows.empty());
  EXPECT_TRUE(report.all_correct());
}

TEST_F(Cli, AblateWritesBothReports) {
  const auto cfg = write("c.conf", "tree_counts=5\nnodes_per_tree=20\nqueries=3\nrounds=2\nskew=1.1\n");
  ASSERT_EQ(run({"ablate", "--input", cfg, "--output", path("ab.csv")}), 0) << err_.str();
  EXPECT_TRUE(fs::exists(path("ab.sort_on.csv")));
  EXPECT_TRUE(fs::exists(path("ab.sort_off.csv")));
}

TEST_F(Cli, FpRate) {
  ASSERT_EQ(run({"fprate", "--probes", "20000", "--output", path("fp.txt")}), 0);
  EXPECT_NE(out_.str().find("inserted=3148"), std::string::npos);
  EXPECT_NE(out_.str().find("wrong_results=0"), std::string::npos);
  EXPECT_EQ(slurp(path("fp.txt")), out_.str());
}

TEST_F(Cli, ErrorExitCodes) {
  EXPECT_EQ(run({"build", "--input", path("nope.tsv"), "--snapshot", path("s")}), 3);
  EXPECT_NE(err_.str().find("nope.tsv"), std::string::npos);

  const auto bad = write("bad.tsv", "0\tA\tB\nnot a tuple\n");
  EXPECT_EQ(run({"build", "--input", bad, "--snapshot", path("s")}), 4);
  EXPECT_NE(err_.str().find("bad.tsv:2"), std::string::npos) << err_.str();

  const auto two = write("two.tsv", "0\tA\tC\n0\tB\tC\n");
  EXPECT_EQ(run({"build", "--input", two, "--snapshot", path("s")}), 4);

  const auto junk = write("junk.snap", "garbage\n");
  const auto q = write("q.tsv", "A\n");
  EXPECT_EQ(run({"query", "--snapshot", junk, "--input", q}), 4);
  EXPECT_NE(err_.str().find("junk.snap:1"), std::string::npos) << err_.str();

  const auto conf = write("b.conf", "rounds=1\nbogus=1\n");
  EXPECT_EQ(run({"bench", "--input", conf, "--output", path("o.csv")}), 4);
  EXPECT_EQ(run({"query", "--snapshot", junk, "--input", q, "--n", "0"}), 2);
}

TEST_F(Cli, BinaryExitStatus) {
  const auto status = std::system((std::string(CFTRAG_CLI) + " > /dev/null 2>&1").c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
  const auto ok = std::system((std::string(CFTRAG_CLI) + " build --input " CFTRAG_DATA_DIR
                               "/sample_relations.tsv --snapshot " + path("s.snap") + " > /dev/null")
                                  .c_str());
  ASSERT_TRUE(WIFEXITED(ok));
  EXPECT_EQ(WEXITSTATUS(ok), 0);
}
