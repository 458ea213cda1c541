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

// File formats. All JSON documents carry "format_version" and a "kind" tag;
// ids on disk are 1-based. CSV tables have a fixed header row:
//
//   communities.csv  community,allocation,share
//   links.csv        link,tail,head,flow
//   compare.csv      community,fair_allocation,maxsum_allocation
//   sweep.csv        delta,community,allocation,objective

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uamfair/casegen.hpp"
#include "uamfair/errors.hpp"
#include "uamfair/fairsolver.hpp"
#include "uamfair/network.hpp"
#include "uamfair/riskmeasures.hpp"

namespace uamfair::io {

using json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kToolVersion = "uamfair 1.0.0";

// ---------------------------------------------------------------------------
// Text helpers

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary and renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(tmp.string() + ": cannot write");
    out << content;
    if (!out) throw Error(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Parsing with located diagnostics

inline json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string what = e.what();
    if (auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    throw InputError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
  }
}

namespace detail {

class Field {
 public:
  Field(const json& j, std::string path, const std::string& source) : j_(j), path_(std::move(path)), src_(source) {}

  [[noreturn]] void fail(const std::string& msg) const { throw InputError(src_ + ": " + path_ + ": " + msg); }

  Field at(const std::string& key) const {
    if (!j_.is_object()) fail("expected an object");
    auto it = j_.find(key);
    if (it == j_.end()) throw InputError(src_ + ": " + child(key) + ": missing field");
    return Field(*it, child(key), src_);
  }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key); }
  Field at(std::size_t i) const { return Field(j_.at(i), path_ + "[" + std::to_string(i) + "]", src_); }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }
  double number() const {
    if (!j_.is_number()) fail("expected a number");
    return j_.get<double>();
  }
  std::size_t count() const {
    if (!j_.is_number_integer() || j_.get<long long>() < 0) fail("expected a nonnegative integer");
    return j_.get<std::size_t>();
  }
  // 1-based id on disk -> 0-based in memory.
  std::size_t id() const {
    if (!j_.is_number_integer() || j_.get<long long>() < 1) fail("expected a positive integer id");
    return j_.get<std::size_t>() - 1;
  }
  Vec numbers() const {
    Vec out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).number();
    return out;
  }
  std::vector<std::size_t> ids() const {
    std::vector<std::size_t> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i).id();
    return out;
  }
  const json& raw() const { return j_; }

 private:
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
  const std::string& src_;
};

inline void check_header(const Field& root, const char* kind) {
  if (!root.raw().is_object()) root.fail("expected a JSON object");
  const auto v = root.at("format_version").count();
  if (v != static_cast<std::size_t>(kFormatVersion)) {
    root.at("format_version").fail("unsupported format_version " + std::to_string(v));
  }
  if (root.has("kind")) {
    const auto& k = root.at("kind").raw();
    if (!k.is_string() || k.get<std::string>() != kind) root.at("kind").fail(std::string("expected \"") + kind + "\"");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Network

inline json network_to_json(const Network& net, const json& provenance = json::object()) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "uamfair.network";
  if (!provenance.empty()) j["provenance"] = provenance;
  json nodes = {{"count", net.node_count}};
  if (!net.coordinates.empty()) {
    json c = json::array();
    for (const auto& p : net.coordinates) c.push_back({p[0], p[1]});
    nodes["coordinates"] = c;
  }
  j["nodes"] = nodes;
  json links = json::array();
  for (const auto& l : net.links) links.push_back({l.tail + 1, l.head + 1});
  j["links"] = links;
  auto one_based = [](const std::vector<std::vector<std::size_t>>& v) {
    json a = json::array();
    for (const auto& r : v) {
      json row = json::array();
      for (std::size_t id : r) row.push_back(id + 1);
      a.push_back(row);
    }
    return a;
  };
  j["routes"] = one_based(net.routes);
  j["communities"] = net.community_count;
  j["route_communities"] = one_based(net.route_communities);
  return j;
}

inline Network network_from_json(const json& j, const std::string& source = "network") {
  detail::Field root(j, "", source);
  detail::check_header(root, "uamfair.network");
  Network net;
  const auto nodes = root.at("nodes");
  net.node_count = nodes.at("count").count();
  if (nodes.has("coordinates")) {
    const auto c = nodes.at("coordinates");
    if (c.size() != net.node_count) c.fail("expected " + std::to_string(net.node_count) + " coordinate pairs");
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto p = c.at(i);
      if (p.size() != 2) p.fail("expected [x, y]");
      net.coordinates.push_back({p.at(0).number(), p.at(1).number()});
    }
  }
  const auto links = root.at("links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto l = links.at(i);
    if (l.size() != 2) l.fail("expected [tail, head]");
    net.links.push_back({l.at(0).id(), l.at(1).id()});
  }
  const auto routes = root.at("routes");
  for (std::size_t i = 0; i < routes.size(); ++i) net.routes.push_back(routes.at(i).ids());
  const auto comm = root.at("communities");
  net.community_count = comm.raw().is_object() ? comm.at("count").count() : comm.count();
  const auto rc = root.at("route_communities");
  if (rc.size() != net.routes.size()) {
    rc.fail("expected " + std::to_string(net.routes.size()) + " entries (one per route)");
  }
  for (std::size_t i = 0; i < rc.size(); ++i) net.route_communities.push_back(rc.at(i).ids());
  return net;
}

// ---------------------------------------------------------------------------
// Scenarios

inline json scenarios_to_json(const ScenarioSet& s, const json& provenance = json::object()) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "uamfair.scenarios";
  if (!provenance.empty()) j["provenance"] = provenance;
  json arr = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) {
    arr.push_back({{"node_caps", s.node_caps[i]}, {"link_caps", s.link_caps[i]}, {"prob", s.prob[i]}});
  }
  j["scenarios"] = arr;
  return j;
}

inline ScenarioSet scenarios_from_json(const json& j, const std::string& source = "scenarios") {
  detail::Field root(j, "", source);
  detail::check_header(root, "uamfair.scenarios");
  ScenarioSet s;
  const auto arr = root.at("scenarios");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto e = arr.at(i);
    s.node_caps.push_back(e.at("node_caps").numbers());
    s.link_caps.push_back(e.at("link_caps").numbers());
    s.prob.push_back(e.at("prob").number());
  }
  return s;
}

inline Network load_network(const std::filesystem::path& path) {
  const std::string src = path.string();
  return network_from_json(parse_json(read_file(path), src), src);
}

inline ScenarioSet load_scenarios(const std::filesystem::path& path) {
  const std::string src = path.string();
  return scenarios_from_json(parse_json(read_file(path), src), src);
}

inline json case_provenance(const CaseSpec& spec) {
  json rules = json::array();
  for (const auto& r : spec.reductions) rules.push_back({{"fraction", r.fraction}, {"probability", r.probability}});
  return {{"generator", kToolVersion},
          {"seed", spec.seed},
          {"spec",
           {{"nodes", spec.node_count},
            {"links", spec.link_count},
            {"routes", spec.route_count},
            {"communities", spec.community_count},
            {"max_route_length", spec.max_route_length},
            {"node_capacity", spec.node_capacity},
            {"link_capacity", spec.link_capacity},
            {"reductions", rules}}}};
}

// ---------------------------------------------------------------------------
// Results

inline json risk_to_json(const RiskSpec& r) {
  return {{"kind", to_string(r.kind)}, {"delta", r.delta}, {"epsilon", r.epsilon}};
}

// Deterministic: no timing or host data.
inline json solution_to_json(const FairProblem& prob, const FlowSolution& sol, const SolveReport& rep) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "uamfair.solution";
  j["objective_kind"] = rep.objective_kind;
  j["alpha"] = rep.alpha;
  j["x_min"] = prob.x_min;
  j["risk"] = risk_to_json(prob.risk);
  j["x"] = sol.x;
  j["y"] = sol.y;
  j["z"] = sol.z;
  j["certificate"] = {{"w", sol.certificate.w},
                      {"lambda", sol.certificate.lambda},
                      {"nu", sol.certificate.nu},
                      {"h", sol.certificate.h}};
  return j;
}

inline json residuals_to_json(const Residuals& r) {
  return {{"balance", r.balance},
          {"allocation", r.allocation},
          {"route_capacity", r.route_capacity},
          {"scenario_capacity", r.scenario_capacity},
          {"certificate_h", r.certificate_h},
          {"certificate_value", r.certificate_value},
          {"certificate_domain", r.certificate_domain},
          {"negativity", r.negativity},
          {"floor", r.floor}};
}

inline json fairness_to_json(const FairnessMetrics& m) {
  return {{"total", m.total}, {"min_share", m.min_share}, {"max_share", m.max_share}, {"jain", m.jain}};
}

inline json report_to_json(const FairProblem& prob, const FlowSolution& sol, const SolveReport& rep) {
  json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "uamfair.report";
  j["tool"] = kToolVersion;
  j["objective_kind"] = rep.objective_kind;
  j["alpha"] = rep.alpha;
  j["risk"] = risk_to_json(prob.risk);
  j["solver"] = {{"step_rule", to_string(prob.config.step_rule)},
                 {"max_iterations", prob.config.max_iterations},
                 {"gap_tol", prob.config.gap_tol},
                 {"x_min", prob.x_min}};
  j["objective"] = rep.objective;
  j["iterations"] = rep.iterations;
  j["final_gap"] = rep.final_gap;
  j["gap_trace"] = rep.gap_trace;
  j["best_gap_trace"] = rep.best_gap_trace;
  j["objective_trace"] = rep.objective_trace;
  j["lp_iterations"] = rep.lp_iterations;
  j["cuts_added"] = rep.cuts_added;
  j["wall_time_s"] = rep.wall_time_s;
  j["residuals"] = residuals_to_json(rep.residuals);
  j["fairness"] = fairness_to_json(rep.fairness);
  j["rho"] = rep.rho;
  j["certificate_rho"] = rep.certificate_rho;
  j["lambda_bound_active"] = rep.lambda_bound_active;
  json table = json::array();
  for (std::size_t k = 0; k < sol.x.size(); ++k) {
    table.push_back({{"community", k + 1}, {"allocation", sol.x[k]},
                     {"share", rep.fairness.total > 0 ? sol.x[k] / rep.fairness.total : 0.0}});
  }
  j["allocations"] = table;
  return j;
}

inline std::string communities_csv(const FlowSolution& sol) {
  double total = 0.0;
  for (double v : sol.x) total += v;
  std::string out = "community,allocation,share\n";
  for (std::size_t k = 0; k < sol.x.size(); ++k) {
    out += std::to_string(k + 1) + "," + fmt(sol.x[k]) + "," + fmt(total > 0 ? sol.x[k] / total : 0.0) + "\n";
  }
  return out;
}

inline std::string links_csv(const Network& net, const FlowSolution& sol) {
  std::string out = "link,tail,head,flow\n";
  for (std::size_t k = 0; k < sol.y.size(); ++k) {
    out += std::to_string(k + 1) + "," + std::to_string(net.links[k].tail + 1) + "," +
           std::to_string(net.links[k].head + 1) + "," + fmt(sol.y[k]) + "\n";
  }
  return out;
}

inline std::string compare_csv(const FlowSolution& fair, const FlowSolution& maxsum) {
  std::string out = "community,fair_allocation,maxsum_allocation\n";
  for (std::size_t k = 0; k < fair.x.size(); ++k) {
    out += std::to_string(k + 1) + "," + fmt(fair.x[k]) + "," + fmt(maxsum.x[k]) + "\n";
  }
  return out;
}

inline std::string sweep_rows(double delta, const FlowSolution& sol, const std::string& tag) {
  std::string out;
  for (std::size_t k = 0; k < sol.x.size(); ++k) {
    out += fmt(delta) + "," + std::to_string(k + 1) + "," + fmt(sol.x[k]) + "," + tag + "\n";
  }
  return out;
}

inline const char* kSweepHeader = "delta,community,allocation,objective\n";

inline json metrics_to_json(const FairProblem& prob, const SolveReport& fair, const SolveReport& maxsum) {
  auto block = [](const SolveReport& r) {
    json b = fairness_to_json(r.fairness);
    b["objective"] = r.objective;
    b["final_gap"] = r.final_gap;
    b["rho"] = r.rho;
    return b;
  };
  return {{"format_version", kFormatVersion},
          {"kind", "uamfair.metrics"},
          {"alpha", prob.alpha},
          {"risk", risk_to_json(prob.risk)},
          {"fair", block(fair)},
          {"maxsum", block(maxsum)}};
}

}  // namespace uamfair::io
