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

#pragma once

// Command-line front end. Exit codes: 0 success, 1 input/IO/solver error,
// 2 infeasible (allocation floor or risk budget cannot be met).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "uamfair/casegen.hpp"
#include "uamfair/errors.hpp"
#include "uamfair/fairsolver.hpp"
#include "uamfair/io.hpp"

namespace uamfair::cli {

namespace fs = std::filesystem;

struct ProblemOptions {
  std::string network;
  std::string scenarios;
  std::string out = ".";
  double alpha = 1.0;
  double epsilon = 0.1;
  std::string risk = "cvar";
  double delta = 0.5;
  std::size_t max_iters = 100;
  double gap_tol = 1e-6;
  double x_min = 1e-3;
  std::string step_rule = "line-search";
  std::uint64_t seed = 1;
};

inline void add_problem_options(CLI::App& cmd, ProblemOptions& o, bool with_delta = true) {
  cmd.add_option("--network", o.network, "network JSON file")->required();
  cmd.add_option("--scenarios", o.scenarios, "scenario JSON file")->required();
  cmd.add_option("--out", o.out, "output directory")->capture_default_str();
  cmd.add_option("--alpha", o.alpha, "fairness parameter alpha >= 0")->capture_default_str();
  cmd.add_option("--epsilon", o.epsilon, "risk tolerance epsilon >= 0")->capture_default_str();
  cmd.add_option("--risk", o.risk, "risk measure: cvar, evar or tv")->capture_default_str();
  if (with_delta) cmd.add_option("--delta", o.delta, "uncertainty level delta")->capture_default_str();
  cmd.add_option("--max-iters", o.max_iters, "Frank-Wolfe iteration limit")->capture_default_str();
  cmd.add_option("--gap-tol", o.gap_tol, "Frank-Wolfe gap tolerance")->capture_default_str();
  cmd.add_option("--x-min", o.x_min, "allocation floor per community")->capture_default_str();
  cmd.add_option("--step-rule", o.step_rule, "line-search, classic or fully-corrective")->capture_default_str();
  cmd.add_option("--seed", o.seed, "seed for sampled fairness checks")->capture_default_str();
}

inline FairProblem load_problem(const ProblemOptions& o) {
  FairProblem p;
  p.network = io::load_network(o.network);
  if (auto v = validate_network(p.network); !v.empty()) throw InputError(o.network + ": " + v.front().message);
  p.scenarios = io::load_scenarios(o.scenarios);
  if (auto v = validate_scenarios(p.scenarios, p.network.node_count, p.network.link_count()); !v.empty()) {
    throw InputError(o.scenarios + ": " + v.front().message);
  }
  p.risk = {parse_risk_kind(o.risk), o.delta, o.epsilon};
  p.alpha = o.alpha;
  p.x_min = o.x_min;
  p.config.max_iterations = o.max_iters;
  p.config.gap_tol = o.gap_tol;
  p.config.step_rule = parse_step_rule(o.step_rule);
  return p;
}

inline std::string dump(const io::json& j) { return j.dump(2) + "\n"; }

inline int cmd_validate(const std::string& network, const std::string& scenarios, std::ostream& out,
                        std::ostream& err) {
  const Network net = io::load_network(network);
  const auto v = validate_network(net);
  for (const auto& e : v) err << network << ": " << e.message << "\n";
  bool ok = v.empty();
  if (ok) {
    out << network << ": ok (" << net.node_count << " nodes, " << net.link_count() << " links, "
        << net.route_count() << " routes, " << net.community_count << " communities)\n";
  }
  if (!scenarios.empty()) {
    const ScenarioSet s = io::load_scenarios(scenarios);
    const auto sv = validate_scenarios(s, net.node_count, net.link_count());
    for (const auto& e : sv) err << scenarios << ": " << e.message << "\n";
    if (sv.empty()) out << scenarios << ": ok (" << s.size() << " scenarios)\n";
    ok = ok && sv.empty();
  }
  return ok ? 0 : 1;
}

inline int cmd_gen(const CaseSpec& spec, const std::string& out_dir, std::ostream& out) {
  const GeneratedCase gc = generate(spec);
  const io::json prov = io::case_provenance(spec);
  const fs::path dir(out_dir);
  io::write_file_atomic(dir / "network.json", dump(io::network_to_json(gc.network, prov)));
  io::write_file_atomic(dir / "scenarios.json", dump(io::scenarios_to_json(gc.scenarios, prov)));
  out << "wrote " << (dir / "network.json").string() << " and " << (dir / "scenarios.json").string() << " ("
      << gc.network.node_count << " nodes, " << gc.network.link_count() << " links, " << gc.network.route_count()
      << " routes, " << gc.network.community_count << " communities, " << gc.scenarios.size() << " scenarios)\n";
  return 0;
}

inline int cmd_solve(const ProblemOptions& o, const std::string& objective, std::size_t fairness_samples,
                     std::ostream& out) {
  FairProblem p = load_problem(o);
  if (objective != "fair" && objective != "maxsum") throw InputError("unknown objective '" + objective + "'");
  const auto [sol, rep] = objective == "fair" ? solve_fair(p) : solve_maxsum(p);
  io::json report = io::report_to_json(p, sol, rep);
  if (fairness_samples > 0 && objective == "fair") {
    const auto chk = check_alpha_fairness(sol.x, p, fairness_samples, o.seed);
    io::json viol = io::json::array();
    for (const auto& [i, v] : chk.violations) viol.push_back({{"sample", i}, {"value", v}});
    report["fairness_check"] = {{"samples", chk.samples}, {"tolerance", chk.tolerance},
                                {"worst", chk.worst}, {"violations", viol}};
  }
  const fs::path dir(o.out);
  io::write_file_atomic(dir / "solution.json", dump(io::solution_to_json(p, sol, rep)));
  io::write_file_atomic(dir / "report.json", dump(report));
  io::write_file_atomic(dir / "communities.csv", io::communities_csv(sol));
  io::write_file_atomic(dir / "links.csv", io::links_csv(p.network, sol));
  out << rep.objective_kind << ": objective " << io::fmt(rep.objective) << ", total served "
      << io::fmt(rep.fairness.total) << ", gap " << io::fmt(rep.final_gap) << ", rho " << io::fmt(rep.rho)
      << ", Jain " << io::fmt(rep.fairness.jain) << "\n";
  return 0;
}

inline int cmd_compare(const ProblemOptions& o, std::ostream& out) {
  FairProblem p = load_problem(o);
  const auto [fsol, frep] = solve_fair(p);
  const auto [msol, mrep] = solve_maxsum(p);
  const fs::path dir(o.out);
  io::write_file_atomic(dir / "compare.csv", io::compare_csv(fsol, msol));
  io::write_file_atomic(dir / "metrics.json", dump(io::metrics_to_json(p, frep, mrep)));
  out << "fair:   total " << io::fmt(frep.fairness.total) << ", min share " << io::fmt(frep.fairness.min_share)
      << ", Jain " << io::fmt(frep.fairness.jain) << "\n"
      << "maxsum: total " << io::fmt(mrep.fairness.total) << ", min share " << io::fmt(mrep.fairness.min_share)
      << ", Jain " << io::fmt(mrep.fairness.jain) << "\n";
  return 0;
}

// One solve pair per delta; points run on up to `jobs` threads, each writing
// its own file (atomically renamed) before the table is assembled in delta
// order. Infeasible points are reported and skipped.
inline int cmd_sweep(const ProblemOptions& o, const std::vector<double>& deltas, std::size_t jobs,
                     std::ostream& out, std::ostream& err) {
  const FairProblem base = load_problem(o);
  for (double d : deltas) check_delta(base.risk.kind, d);
  const fs::path dir(o.out);
  const fs::path points = dir / "points";
  fs::create_directories(points);

  std::vector<int> status(deltas.size(), 0);
  std::vector<std::string> message(deltas.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < deltas.size(); i = next++) {
      FairProblem p = base;
      p.risk.delta = deltas[i];
      try {
        const auto fair = solve_fair(p);
        const auto maxsum = solve_maxsum(p);
        io::write_file_atomic(points / ("point_" + std::to_string(i + 1) + ".csv"),
                              io::sweep_rows(deltas[i], fair.first, "fair") +
                                  io::sweep_rows(deltas[i], maxsum.first, "maxsum"));
      } catch (const InfeasibleError& e) {
        status[i] = 2;
        message[i] = e.what();
      } catch (const std::exception& e) {
        status[i] = 1;
        message[i] = e.what();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, deltas.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string table = io::kSweepHeader;
  std::size_t ok = 0;
  int worst = 0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    const fs::path f = points / ("point_" + std::to_string(i + 1) + ".csv");
    if (status[i] == 0) {
      table += io::read_file(f);
      ++ok;
    } else {
      err << "delta " << io::fmt(deltas[i]) << ": " << (status[i] == 2 ? "infeasible, skipped: " : "error: ")
          << message[i] << "\n";
      worst = std::max(worst, status[i] == 1 ? 1 : 0);
    }
  }
  io::write_file_atomic(dir / "sweep.csv", table);
  out << "sweep: " << ok << " of " << deltas.size() << " points solved\n";
  if (worst == 1) return 1;
  return ok == 0 ? 2 : 0;
}

// Entry point; args exclude the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Risk-aware alpha-fair routing for urban air mobility networks", "uamfair"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::kToolVersion);

  std::string v_network, v_scenarios;
  auto* validate_cmd = app.add_subcommand("validate", "check network and scenario files");
  validate_cmd->add_option("--network", v_network, "network JSON file")->required();
  validate_cmd->add_option("--scenarios", v_scenarios, "scenario JSON file");

  CaseSpec spec;
  std::string gen_out = ".";
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic case");
  gen_cmd->add_option("--seed", spec.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--nodes", spec.node_count, "node count")->capture_default_str();
  gen_cmd->add_option("--links", spec.link_count, "directed link count (even)")->capture_default_str();
  gen_cmd->add_option("--routes", spec.route_count, "route count")->capture_default_str();
  gen_cmd->add_option("--communities", spec.community_count, "community count")->capture_default_str();
  gen_cmd->add_option("--max-route-length", spec.max_route_length, "links per route at most")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "output directory")->capture_default_str();

  ProblemOptions solve_opts;
  std::string objective = "fair";
  std::size_t fairness_samples = 0;
  auto* solve_cmd = app.add_subcommand("solve", "solve one instance");
  add_problem_options(*solve_cmd, solve_opts);
  solve_cmd->add_option("--objective", objective, "fair or maxsum")->capture_default_str();
  solve_cmd->add_option("--check-fairness", fairness_samples, "sampled fairness-condition checks (0 = off)")
      ->capture_default_str();

  ProblemOptions compare_opts;
  auto* compare_cmd = app.add_subcommand("compare", "alpha-fair versus max-sum on the same constraints");
  add_problem_options(*compare_cmd, compare_opts);

  ProblemOptions sweep_opts;
  std::vector<double> deltas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::size_t jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "solve across a list of delta values");
  add_problem_options(*sweep_cmd, sweep_opts, false);
  sweep_cmd->add_option("--deltas", deltas, "comma-separated delta values")->delimiter(',');
  sweep_cmd->add_option("--jobs", jobs, "concurrent points")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*validate_cmd) return cmd_validate(v_network, v_scenarios, out, err);
    if (*gen_cmd) return cmd_gen(spec, gen_out, out);
    if (*solve_cmd) return cmd_solve(solve_opts, objective, fairness_samples, out);
    if (*compare_cmd) return cmd_compare(compare_opts, out);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, deltas, jobs, out, err);
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace uamfair::cli
