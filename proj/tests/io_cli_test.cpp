// Copyright 2026 The uamfair Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uamfair/cli.hpp"
#include "uamfair/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "instances.hpp"

namespace uamfair {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("uamfair_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& f) const { return (path_ / f).string(); }

 private:
  fs::path path_;
};

struct RunResult {
  int code;
  std::string out, err;
};

RunResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_problem(const TempDir& dir, const FairProblem& p) {
  io::write_file_atomic(dir / "network.json", io::network_to_json(p.network).dump(2));
  io::write_file_atomic(dir / "scenarios.json", io::scenarios_to_json(p.scenarios).dump(2));
}

std::vector<std::string> problem_args(const std::string& cmd, const TempDir& dir, const std::string& out) {
  return {cmd, "--network", dir / "network.json", "--scenarios", dir / "scenarios.json", "--out", out};
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

TEST(Io, NetworkRoundTripUsesOneBasedIds) {
  CaseSpec spec;
  spec.seed = 3;
  const auto gc = generate(spec);
  const auto j = io::network_to_json(gc.network, io::case_provenance(spec));
  EXPECT_EQ(j["format_version"], 1);
  EXPECT_EQ(j["links"][0][0].get<std::size_t>(), gc.network.links[0].tail + 1);
  EXPECT_EQ(j["routes"][0][0].get<std::size_t>(), gc.network.routes[0][0] + 1);
  EXPECT_EQ(io::network_from_json(io::json::parse(j.dump())), gc.network);
  const auto s = io::scenarios_to_json(gc.scenarios);
  EXPECT_EQ(io::scenarios_from_json(io::json::parse(s.dump())), gc.scenarios);
}

TEST(Io, DiagnosticsNameLocationAndField) {
  auto expect_msg = [](const std::string& text, const std::string& needle) {
    try {
      io::network_from_json(io::parse_json(text, "net.json"), "net.json");
      FAIL() << "expected InputError for " << text;
    } catch (const InputError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_msg("{\n  \"format_version\": 1,\n  \"nodes\": {\"count\": 2", "net.json:3:");
  expect_msg(R"({"format_version": 1, "nodes": {"count": 2}, "links": [[1, 2]], "communities": 1,
                 "route_communities": [[1]]})",
             "routes: missing field");
  expect_msg(R"({"format_version": 1, "nodes": {"count": 2}, "links": [[1, 2], [0, 1]], "routes": [[1]],
                 "communities": 1, "route_communities": [[1]]})",
             "links[1][0]: expected a positive integer id");
  expect_msg(R"({"format_version": 2, "nodes": {"count": 2}})", "unsupported format_version 2");
  expect_msg(R"({"format_version": 1, "kind": "uamfair.scenarios"})", "kind");
  expect_msg(R"({"format_version": 1, "nodes": {"count": 2}, "links": [[1, 2]], "routes": [[1]],
                 "communities": 1, "route_communities": []})",
             "route_communities: expected 1 entries");
}

TEST(Io, AtomicWriteReplacesFile) {
  TempDir dir("atomic");
  io::write_file_atomic(dir / "a.txt", "one");
  io::write_file_atomic(dir / "a.txt", "two");
  EXPECT_EQ(io::read_file(dir / "a.txt"), "two");
  EXPECT_FALSE(fs::exists(dir / "a.txt.tmp"));
}

TEST(Cli, GenThenValidate) {
  TempDir dir("gen");
  for (const char* seed : {"1", "7", "19"}) {
    const auto g = run({"gen", "--seed", seed, "--out", dir.path().string()});
    ASSERT_EQ(g.code, 0) << g.err;
    const auto v = run({"validate", "--network", dir / "network.json", "--scenarios", dir / "scenarios.json"});
    EXPECT_EQ(v.code, 0) << v.err;
  }
}

TEST(Cli, GenMatchesLibraryAndIsByteStable) {
  TempDir a("gen_a"), b("gen_b");
  ASSERT_EQ(run({"gen", "--seed", "7", "--out", a.path().string()}).code, 0);
  ASSERT_EQ(run({"gen", "--seed", "7", "--out", b.path().string()}).code, 0);
  EXPECT_EQ(io::read_file(a / "network.json"), io::read_file(b / "network.json"));
  EXPECT_EQ(io::read_file(a / "scenarios.json"), io::read_file(b / "scenarios.json"));
  CaseSpec spec;
  spec.seed = 7;
  const auto gc = generate(spec);
  EXPECT_EQ(io::load_network(a / "network.json"), gc.network);
  EXPECT_EQ(io::load_scenarios(a / "scenarios.json"), gc.scenarios);
  const auto prov = io::json::parse(io::read_file(a / "network.json"))["provenance"];
  EXPECT_EQ(prov["seed"], 7);
}

TEST(Cli, ValidateRejectsTruncatedAndInvalid) {
  TempDir dir("validate");
  io::write_file_atomic(dir / "t.json", "{\"format_version\": 1, \"nodes\": {\"count\":");
  auto r = run({"validate", "--network", dir / "t.json"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("t.json:1:"), std::string::npos) << r.err;

  auto p = testing::tiny_problem();
  p.network.links[1] = {1, 1};
  io::write_file_atomic(dir / "n.json", io::network_to_json(p.network).dump());
  r = run({"validate", "--network", dir / "n.json"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("self-loop"), std::string::npos) << r.err;
}

TEST(Cli, SolveTinyCase) {
  TempDir dir("solve_tiny");
  write_problem(dir, testing::tiny_problem(RiskKind::CVaR, 0.0));
  auto args = problem_args("solve", dir, dir / "out");
  args.insert(args.end(), {"--epsilon", "0"});
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(dir / "out/communities.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"community", "allocation", "share"}));
  EXPECT_EQ(rows[1][0], "1");
  EXPECT_NEAR(std::stod(rows[1][1]), 10.0, 1e-9);
  const auto links = read_csv(dir / "out/links.csv");
  EXPECT_EQ(links.size(), 3u);
  const auto sol = io::json::parse(io::read_file(dir / "out/solution.json"));
  EXPECT_EQ(sol["format_version"], 1);
  EXPECT_NEAR(sol["x"][0].get<double>(), 10.0, 1e-9);
  const auto rep = io::json::parse(io::read_file(dir / "out/report.json"));
  EXPECT_LE(rep["residuals"]["balance"].get<double>(), 1e-8);
  EXPECT_EQ(rep["allocations"].size(), 1u);
}

TEST(Cli, SolveIsByteDeterministic) {
  TempDir dir("solve_det");
  write_problem(dir, testing::random_problem(4, RiskKind::EVaR));
  ASSERT_EQ(run(problem_args("solve", dir, dir / "a")).code, 0);
  ASSERT_EQ(run(problem_args("solve", dir, dir / "b")).code, 0);
  EXPECT_EQ(io::read_file(dir / "a/solution.json"), io::read_file(dir / "b/solution.json"));
  EXPECT_EQ(io::read_file(dir / "a/communities.csv"), io::read_file(dir / "b/communities.csv"));
}

TEST(Cli, ExitCodes) {
  TempDir dir("exit");
  // Malformed network: exit 1 naming the field.
  io::write_file_atomic(dir / "network.json", R"({"format_version": 1, "nodes": {"count": 2}, "links": "x"})");
  io::write_file_atomic(dir / "scenarios.json", io::scenarios_to_json(testing::tiny_problem().scenarios).dump());
  auto r = run(problem_args("solve", dir, dir / "out"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("links"), std::string::npos) << r.err;

  // epsilon = 0 with a scenario that closes the only route: exit 2.
  auto p = testing::tiny_problem();
  p.scenarios.node_caps.push_back({10, 10});
  p.scenarios.link_caps.push_back({0, 10});
  p.scenarios.prob = {0.9, 0.1};
  write_problem(dir, p);
  auto args = problem_args("solve", dir, dir / "out");
  args.insert(args.end(), {"--epsilon", "0"});
  r = run(args);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("allocation floor"), std::string::npos) << r.err;

  EXPECT_EQ(run({"solve", "--bogus"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  args = problem_args("solve", dir, dir / "out");
  args.insert(args.end(), {"--risk", "var"});
  EXPECT_EQ(run(args).code, 1);
}

TEST(Cli, CompareSymmetricAndBottleneck) {
  TempDir dir("compare");
  write_problem(dir, testing::symmetric_problem());
  ASSERT_EQ(run(problem_args("compare", dir, dir / "sym")).code, 0);
  auto rows = read_csv(dir / "sym/compare.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"community", "fair_allocation", "maxsum_allocation"}));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_NEAR(std::stod(rows[i][1]), std::stod(rows[i][2]), 1e-6);

  write_problem(dir, testing::shared_bottleneck_problem(1.0));
  auto args = problem_args("compare", dir, dir / "bn");
  args.insert(args.end(), {"--epsilon", "0", "--step-rule", "fully-corrective", "--gap-tol", "1e-10"});
  ASSERT_EQ(run(args).code, 0);
  rows = read_csv(dir / "bn/compare.csv");
  EXPECT_NEAR(std::stod(rows[1][1]), 7.0, 1e-6);
  EXPECT_NEAR(std::stod(rows[2][1]), 7.0, 1e-6);
  const auto m = io::json::parse(io::read_file(dir / "bn/metrics.json"));
  EXPECT_GE(m["maxsum"]["total"].get<double>(), m["fair"]["total"].get<double>() - 1e-9);
  EXPECT_NEAR(m["fair"]["jain"].get<double>(), 1.0, 1e-9);
}

TEST(Cli, SweepRowsAndMonotoneMaxSum) {
  TempDir dir("sweep");
  const auto p = testing::random_problem(2, RiskKind::CVaR);
  write_problem(dir, p);
  auto args = problem_args("sweep", dir, dir / "one");
  args.insert(args.end(), {"--deltas", "0.5"});
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(read_csv(dir / "one/sweep.csv").size(), 1 + 2 * p.network.community_count);

  args = problem_args("sweep", dir, dir / "many");
  args.insert(args.end(), {"--deltas", "0.1,0.5,0.9", "--jobs", "3"});
  ASSERT_EQ(run(args).code, 0);
  const auto rows = read_csv(dir / "many/sweep.csv");
  ASSERT_EQ(rows.size(), 1 + 3 * 2 * p.network.community_count);
  std::map<std::string, double> total;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][3] == "maxsum") total[rows[i][0]] += std::stod(rows[i][2]);
  }
  EXPECT_LE(total["0.5"], total["0.1"] + 1e-7);
  EXPECT_LE(total["0.9"], total["0.5"] + 1e-7);

  // Same table regardless of the worker count.
  args = problem_args("sweep", dir, dir / "serial");
  args.insert(args.end(), {"--deltas", "0.1,0.5,0.9", "--jobs", "1"});
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(io::read_file(dir / "serial/sweep.csv"), io::read_file(dir / "many/sweep.csv"));
}

TEST(Cli, SweepSkipsInfeasiblePoints) {
  // Nominal capacity 10, reduced capacity 5 (prob 0.5 each); floor 6 forces
  // h = (0, 0.2). CVaR at delta 0.1 is 0.111 <= 0.15; at delta 0.9 it is 0.2.
  TempDir dir("sweep_skip");
  auto p = testing::tiny_problem();
  p.scenarios.node_caps = {{10, 10}, {5, 5}};
  p.scenarios.link_caps = {{10, 10}, {5, 5}};
  p.scenarios.prob = {0.5, 0.5};
  write_problem(dir, p);
  auto args = problem_args("sweep", dir, dir / "out");
  args.insert(args.end(), {"--deltas", "0.1,0.9", "--epsilon", "0.15", "--x-min", "6"});
  const auto r = run(args);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("delta 0.9: infeasible"), std::string::npos) << r.err;
  EXPECT_EQ(read_csv(dir / "out/sweep.csv").size(), 3u);

  args = problem_args("sweep", dir, dir / "none");
  args.insert(args.end(), {"--deltas", "0.9", "--epsilon", "0.15", "--x-min", "6"});
  EXPECT_EQ(run(args).code, 2);
}

TEST(Cli, TvAtZeroDeltaIsExpectationConstraint) {
  // Q(0) = {p} for TV; CVaR with delta -> 0 has the same envelope.
  TempDir dir("tv0");
  write_problem(dir, testing::random_problem(6, RiskKind::TV));
  auto a = problem_args("solve", dir, dir / "tv");
  a.insert(a.end(), {"--risk", "tv", "--delta", "0", "--objective", "maxsum"});
  ASSERT_EQ(run(a).code, 0);
  auto b = problem_args("solve", dir, dir / "cvar");
  b.insert(b.end(), {"--risk", "cvar", "--delta", "1e-12", "--objective", "maxsum"});
  ASSERT_EQ(run(b).code, 0);
  const auto ja = io::json::parse(io::read_file(dir / "tv/report.json"));
  const auto jb = io::json::parse(io::read_file(dir / "cvar/report.json"));
  EXPECT_NEAR(ja["objective"].get<double>(), jb["objective"].get<double>(), 1e-6);
}

}  // namespace
}  // namespace uamfair
