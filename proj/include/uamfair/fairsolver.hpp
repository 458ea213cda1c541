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

// Risk-aware alpha-fair routing.
//
//   maximize    sum_k psi(x_k)
//   subject to  E y = 0,  x = H z,  F z <= y,
//               K y <= (1 + h_i) c^i,  y <= (1 + h_i) d^i     for every scenario i,
//               w - nu 1 >= h,  lambda g*(w / lambda) - nu <= epsilon,
//               y, z, h >= 0,  lambda >= 0,  x >= x_min
//
// The conjugate constraint is linear for CVaR and TV (after writing the
// conjugate's domain as rows) and is outer-approximated by supporting
// hyperplanes for EVaR. The concave objective is maximized by Frank-Wolfe
// over this polytope with the simplex solver as linear minimization oracle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uamfair/errors.hpp"
#include "uamfair/linalg.hpp"
#include "uamfair/lpcore.hpp"
#include "uamfair/network.hpp"
#include "uamfair/riskmeasures.hpp"

namespace uamfair {

// ---------------------------------------------------------------------------
// alpha-utility

inline double alpha_utility(double x, double alpha) {
  if (!(x > 0.0)) throw DomainError("alpha_utility: allocation must be positive");
  if (!(alpha >= 0.0)) throw DomainError("alpha_utility: alpha must be nonnegative");
  if (alpha == 1.0) return std::log(x);
  return std::pow(x, 1.0 - alpha) / (1.0 - alpha);
}

inline double alpha_utility_grad(double x, double alpha) {
  if (!(x > 0.0)) throw DomainError("alpha_utility_grad: allocation must be positive");
  if (!(alpha >= 0.0)) throw DomainError("alpha_utility_grad: alpha must be nonnegative");
  return alpha == 0.0 ? 1.0 : std::pow(x, -alpha);
}

// ---------------------------------------------------------------------------
// Problem and solution types

enum class StepRule {
  LineSearch,      // exact line search along the Frank-Wolfe direction
  Classic,         // gamma_t = 2 / (t + 2)
  FullyCorrective  // re-optimize over the hull of all oracle vertices
};

inline std::string to_string(StepRule r) {
  switch (r) {
    case StepRule::LineSearch: return "line-search";
    case StepRule::Classic: return "classic";
    case StepRule::FullyCorrective: return "fully-corrective";
  }
  return "?";
}

inline StepRule parse_step_rule(const std::string& s) {
  if (s == "line-search") return StepRule::LineSearch;
  if (s == "classic") return StepRule::Classic;
  if (s == "fully-corrective") return StepRule::FullyCorrective;
  throw InputError("unknown step rule '" + s + "'");
}

struct SolverConfig {
  std::size_t max_iterations = 100;
  double gap_tol = 1e-6;
  StepRule step_rule = StepRule::LineSearch;
  std::size_t cut_budget = 200;       // EVaR supporting hyperplanes per solve
  double cut_tol = 1e-7;              // violation that triggers a new cut
  double cut_accept_tol = 1e-6;       // violation tolerated once the budget is spent
  double lambda_min = 1e-9;           // EVaR: lambda >= lambda_min
  double line_search_tol = 1e-10;
  lp::SimplexOptions lp;
};

struct FairProblem {
  Network network;
  ScenarioSet scenarios;
  RiskSpec risk;
  double alpha = 1.0;
  double x_min = 1e-3;
  SolverConfig config;
};

struct Certificate {
  Vec w;
  double lambda = 0.0;
  double nu = 0.0;
  Vec h;
};

struct FlowSolution {
  Vec x;  // payload/hour per community
  Vec y;  // vehicles/hour per link
  Vec z;  // payload/hour per route
  Certificate certificate;
};

struct Residuals {
  double balance = 0.0;             // max |E y|
  double allocation = 0.0;          // max |x - H z|
  double route_capacity = 0.0;      // max (F z - y)+
  double scenario_capacity = 0.0;   // max over scenarios of (K y - (1+h) c)+ and (y - (1+h) d)+
  double certificate_h = 0.0;       // max (h - (w - nu 1))+
  double certificate_value = 0.0;   // (lambda g*(w/lambda) - nu - epsilon)+
  double certificate_domain = 0.0;  // CVaR/TV conjugate domain violation
  double negativity = 0.0;          // max (-y, -z, -h, -lambda)+
  double floor = 0.0;               // max (x_min - x)+
};

struct FairnessMetrics {
  double total = 0.0;
  double min_share = 0.0;  // min_k x_k / sum x
  double max_share = 0.0;
  double jain = 0.0;       // (sum x)^2 / (n sum x^2)
};

struct SolveReport {
  std::string objective_kind;  // "alpha-fair" or "max-sum"
  double alpha = 0.0;
  double objective = 0.0;      // sum psi(x), or sum x for max-sum
  std::vector<double> gap_trace;
  std::vector<double> best_gap_trace;
  std::vector<double> objective_trace;
  double final_gap = 0.0;
  std::size_t iterations = 0;
  std::size_t lp_iterations = 0;
  std::size_t cuts_added = 0;
  double wall_time_s = 0.0;
  Residuals residuals;
  FairnessMetrics fairness;
  double rho = 0.0;            // rho(y) recomputed from the flow
  double certificate_rho = 0.0;  // lambda g*(w/lambda) - nu
  bool lambda_bound_active = false;
};

inline FairnessMetrics fairness_metrics(std::span<const double> x) {
  FairnessMetrics m;
  if (x.empty()) return m;
  double sq = 0.0;
  for (double v : x) {
    m.total += v;
    sq += v * v;
  }
  m.min_share = *std::min_element(x.begin(), x.end()) / m.total;
  m.max_share = *std::max_element(x.begin(), x.end()) / m.total;
  m.jain = m.total * m.total / (static_cast<double>(x.size()) * sq);
  return m;
}

inline double total_utility(std::span<const double> x, double alpha) {
  double s = 0.0;
  for (double v : x) s += alpha_utility(v, alpha);
  return s;
}

// lambda g*(w / lambda) - nu with the conjugate's domain violation split out
// (CVaR: sum p|w| - lambda, TV: max|w| - lambda) so that round-off does not
// turn a feasible certificate into +inf.
struct CertificateValue {
  double value = 0.0;
  double domain_violation = 0.0;
};

inline CertificateValue certificate_value(const RiskSpec& risk, std::span<const double> p,
                                          std::span<const double> w, double lambda, double nu) {
  CertificateValue cv;
  switch (risk.kind) {
    case RiskKind::CVaR: {
      double s = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) s += p[i] * std::abs(w[i]);
      cv.value = lambda / (1.0 - risk.delta) - nu;
      cv.domain_violation = std::max(0.0, s - lambda);
      break;
    }
    case RiskKind::TV:
      cv.value = 2.0 * risk.delta * lambda + dot(p, w) - nu;
      cv.domain_violation = std::max(0.0, norm_inf(w) - lambda);
      break;
    case RiskKind::EVaR: {
      if (lambda <= 0.0) {
        cv.value = kInfinity;
        break;
      }
      Vec r(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) r[i] = w[i] / lambda;
      cv.value = lambda * conjugate_g(RiskKind::EVaR, risk.delta, r, p) - nu;
      break;
    }
  }
  return cv;
}

// ---------------------------------------------------------------------------
// Reformulation

struct VariableLayout {
  std::size_t x = 0, y = 0, z = 0, w = 0, lambda = 0, nu = 0, h = 0, t = 0;
  std::size_t communities = 0, links = 0, routes = 0, scenarios = 0, aux = 0;
  std::size_t total = 0;
};

struct Reformulation {
  VariableLayout layout;
  IncidenceMatrices incidence;
  lp::LinearProgram lp;  // zero objective; callers set their own
  bool has_conic = false;  // EVaR: conjugate constraint handled by cuts
  double h_max = 0.0;
  double lambda_max = 0.0;
  std::vector<std::size_t> blocked_links;  // forced to zero by zero capacity
};

inline void validate(const FairProblem& prob) {
  if (auto v = validate_network(prob.network); !v.empty()) {
    throw InputError("network: " + v.front().message);
  }
  if (auto v = validate_scenarios(prob.scenarios, prob.network.node_count, prob.network.link_count());
      !v.empty()) {
    throw InputError("scenarios: " + v.front().message);
  }
  validate(prob.risk);
  if (!(prob.alpha >= 0.0) || !std::isfinite(prob.alpha)) throw DomainError("alpha must be >= 0");
  if (!(prob.x_min > 0.0) || !std::isfinite(prob.x_min)) throw DomainError("x_min must be > 0");
}

namespace detail {

// EVaR conjugate constraint  lambda ln(p' exp(w/lambda)) - lambda ln(1-delta) - nu <= eps.
// Because the left side is positively homogeneous in (w, lambda), the tangent
// plane at a point passes through the origin and reads
//   q'w - (KL(q||p) + ln(1-delta)) lambda - nu <= eps
// with q the Gibbs distribution of w/lambda. Any q in the simplex gives a
// valid outer cut.
inline Vec evar_cut_row(const VariableLayout& L, std::span<const double> q, std::span<const double> p,
                        double delta) {
  Vec row(L.total, 0.0);
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    row[L.w + i] = q[i];
    if (q[i] > 0.0) kl += q[i] * std::log(q[i] / p[i]);
  }
  row[L.lambda] = -(kl + std::log1p(-delta));
  row[L.nu] = -1.0;
  return row;
}

inline void append_row(lp::LinearProgram& lp, const Vec& row, double rhs) {
  Matrix a(lp.A.rows() + 1, lp.A.cols() == 0 ? row.size() : lp.A.cols());
  for (std::size_t i = 0; i < lp.A.rows(); ++i) {
    std::copy(lp.A.row(i).begin(), lp.A.row(i).end(), a.row(i).begin());
  }
  std::copy(row.begin(), row.end(), a.row(lp.A.rows()).begin());
  lp.A = std::move(a);
  lp.b.push_back(rhs);
}

}  // namespace detail

// Assembles the single-level constraint system. Decision vector layout:
// x (communities), y (links), z (routes), w (scenarios), lambda, nu,
// h (scenarios), and for CVaR t (scenarios) with t_i >= |p_i w_i|.
inline Reformulation build_reformulation(const FairProblem& prob) {
  validate(prob);
  const Network& net = prob.network;
  const ScenarioSet& sc = prob.scenarios;
  const RiskSpec& risk = prob.risk;

  Reformulation ref;
  ref.incidence = build_incidence(net);
  const auto& inc = ref.incidence;

  VariableLayout& L = ref.layout;
  L.communities = net.community_count;
  L.links = net.link_count();
  L.routes = net.route_count();
  L.scenarios = sc.size();
  L.aux = risk.kind == RiskKind::CVaR ? sc.size() : 0;
  L.x = 0;
  L.y = L.x + L.communities;
  L.z = L.y + L.links;
  L.w = L.z + L.routes;
  L.lambda = L.w + L.scenarios;
  L.nu = L.lambda + 1;
  L.h = L.nu + 1;
  L.t = L.h + L.scenarios;
  L.total = L.t + L.aux;

  const std::size_t nn = net.node_count;
  const std::size_t n = L.total;
  const auto& p = sc.prob;

  // h_i <= rho / p_i <= epsilon / p_i for any certificate, since rho >= p'h.
  double h_max = 0.0;
  for (double pi : p) h_max = std::max(h_max, risk.epsilon / pi);
  ref.h_max = h_max;
  ref.lambda_max = 10.0 * (1.0 + h_max);

  lp::LinearProgram& lp = ref.lp;
  lp.objective.assign(n, 0.0);
  lp.sense = lp::Sense::Maximize;
  lp.lower.assign(n, 0.0);
  lp.upper.assign(n, lp::kInf);
  for (std::size_t k = 0; k < L.communities; ++k) lp.lower[L.x + k] = prob.x_min;
  for (std::size_t i = 0; i < L.scenarios; ++i) {
    lp.lower[L.w + i] = -lp::kInf;
    lp.upper[L.h + i] = risk.epsilon / p[i];
  }
  lp.lower[L.nu] = -lp::kInf;
  lp.lower[L.lambda] = risk.kind == RiskKind::EVaR ? prob.config.lambda_min : 0.0;
  lp.upper[L.lambda] = ref.lambda_max;
  if (risk.kind == RiskKind::EVaR) {
    // (w + t1, nu + t) is a recession direction of the EVaR certificate set.
    // Box w and nu; the certificates the oracle returns (w = h, nu = 0) lie
    // well inside.
    for (std::size_t i = 0; i < L.scenarios; ++i) {
      lp.lower[L.w + i] = -ref.lambda_max;
      lp.upper[L.w + i] = ref.lambda_max;
    }
    lp.lower[L.nu] = -ref.lambda_max;
    lp.upper[L.nu] = ref.lambda_max;
  }

  // Zero capacity in any scenario forbids flow on that element outright.
  std::vector<bool> blocked(L.links, false);
  for (std::size_t i = 0; i < L.scenarios; ++i) {
    for (std::size_t k = 0; k < L.links; ++k) {
      if (sc.link_caps[i][k] == 0.0) blocked[k] = true;
      if (sc.node_caps[i][net.links[k].head] == 0.0) blocked[k] = true;
    }
  }
  for (std::size_t k = 0; k < L.links; ++k) {
    if (blocked[k]) {
      lp.upper[L.y + k] = 0.0;
      ref.blocked_links.push_back(k);
    }
  }

  // Equalities: E y = 0, x - H z = 0.
  lp.G = Matrix(nn + L.communities, n);
  lp.g.assign(nn + L.communities, 0.0);
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t k = 0; k < L.links; ++k) lp.G(i, L.y + k) = inc.E(i, k);
  }
  for (std::size_t c = 0; c < L.communities; ++c) {
    lp.G(nn + c, L.x + c) = 1.0;
    for (std::size_t r = 0; r < L.routes; ++r) lp.G(nn + c, L.z + r) = -inc.H(c, r);
  }

  std::vector<Vec> rows;
  Vec rhs;
  auto new_row = [&]() -> Vec& {
    rows.emplace_back(n, 0.0);
    rhs.push_back(0.0);
    return rows.back();
  };

  // F z - y <= 0
  for (std::size_t k = 0; k < L.links; ++k) {
    Vec& r = new_row();
    for (std::size_t q = 0; q < L.routes; ++q) r[L.z + q] = inc.F(k, q);
    r[L.y + k] = -1.0;
  }
  // Scenario capacities with inflation h_i.
  for (std::size_t i = 0; i < L.scenarios; ++i) {
    for (std::size_t j = 0; j < nn; ++j) {
      const double c = sc.node_caps[i][j];
      if (c == 0.0) continue;
      Vec& r = new_row();
      for (std::size_t k = 0; k < L.links; ++k) r[L.y + k] = inc.K(j, k);
      r[L.h + i] = -c;
      rhs.back() = c;
    }
    for (std::size_t k = 0; k < L.links; ++k) {
      const double d = sc.link_caps[i][k];
      if (d == 0.0) continue;
      Vec& r = new_row();
      r[L.y + k] = 1.0;
      r[L.h + i] = -d;
      rhs.back() = d;
    }
  }
  // h - w + nu <= 0
  for (std::size_t i = 0; i < L.scenarios; ++i) {
    Vec& r = new_row();
    r[L.h + i] = 1.0;
    r[L.w + i] = -1.0;
    r[L.nu] = 1.0;
  }
  switch (risk.kind) {
    case RiskKind::CVaR: {
      Vec& top = new_row();
      top[L.lambda] = 1.0 / (1.0 - risk.delta);
      top[L.nu] = -1.0;
      rhs.back() = risk.epsilon;
      for (std::size_t i = 0; i < L.scenarios; ++i) {
        Vec& a = new_row();
        a[L.w + i] = p[i];
        a[L.t + i] = -1.0;
        Vec& b = new_row();
        b[L.w + i] = -p[i];
        b[L.t + i] = -1.0;
      }
      Vec& budget = new_row();
      for (std::size_t i = 0; i < L.scenarios; ++i) budget[L.t + i] = 1.0;
      budget[L.lambda] = -1.0;
      for (std::size_t i = 0; i < L.scenarios; ++i) lp.lower[L.t + i] = 0.0;
      break;
    }
    case RiskKind::TV: {
      Vec& top = new_row();
      top[L.lambda] = 2.0 * risk.delta;
      for (std::size_t i = 0; i < L.scenarios; ++i) top[L.w + i] = p[i];
      top[L.nu] = -1.0;
      rhs.back() = risk.epsilon;
      for (std::size_t i = 0; i < L.scenarios; ++i) {
        Vec& a = new_row();
        a[L.w + i] = 1.0;
        a[L.lambda] = -1.0;
        Vec& b = new_row();
        b[L.w + i] = -1.0;
        b[L.lambda] = -1.0;
      }
      break;
    }
    case RiskKind::EVaR: {
      ref.has_conic = true;
      // Seed the outer approximation with q = p and the simplex vertices.
      rows.push_back(detail::evar_cut_row(L, p, p, risk.delta));
      rhs.push_back(risk.epsilon);
      for (std::size_t i = 0; i < L.scenarios; ++i) {
        Vec e(L.scenarios, 0.0);
        e[i] = 1.0;
        rows.push_back(detail::evar_cut_row(L, e, p, risk.delta));
        rhs.push_back(risk.epsilon);
      }
      break;
    }
  }

  lp.A = Matrix(rows.size(), n);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), lp.A.row(i).begin());
  lp.b = std::move(rhs);
  return ref;
}

// ---------------------------------------------------------------------------
// Residuals of a candidate solution against the original constraint system.

inline Residuals check_solution(const FairProblem& prob, const IncidenceMatrices& inc,
                                const FlowSolution& sol) {
  Residuals r;
  const auto& sc = prob.scenarios;
  const Vec ey = multiply(inc.E, sol.y);
  r.balance = norm_inf(ey);
  const Vec hz = multiply(inc.H, sol.z);
  for (std::size_t k = 0; k < hz.size(); ++k) {
    r.allocation = std::max(r.allocation, std::abs(sol.x[k] - hz[k]));
    r.floor = std::max(r.floor, prob.x_min - sol.x[k]);
  }
  const Vec fz = multiply(inc.F, sol.z);
  for (std::size_t k = 0; k < fz.size(); ++k) r.route_capacity = std::max(r.route_capacity, fz[k] - sol.y[k]);
  const Vec ky = multiply(inc.K, sol.y);
  const Certificate& c = sol.certificate;
  for (std::size_t i = 0; i < sc.size(); ++i) {
    for (std::size_t j = 0; j < ky.size(); ++j) {
      r.scenario_capacity = std::max(r.scenario_capacity, ky[j] - (1.0 + c.h[i]) * sc.node_caps[i][j]);
    }
    for (std::size_t k = 0; k < sol.y.size(); ++k) {
      r.scenario_capacity = std::max(r.scenario_capacity, sol.y[k] - (1.0 + c.h[i]) * sc.link_caps[i][k]);
    }
    r.certificate_h = std::max(r.certificate_h, c.h[i] - (c.w[i] - c.nu));
    r.negativity = std::max(r.negativity, -c.h[i]);
  }
  const auto cv = certificate_value(prob.risk, sc.prob, c.w, c.lambda, c.nu);
  r.certificate_value = std::max(0.0, cv.value - prob.risk.epsilon);
  r.certificate_domain = cv.domain_violation;
  for (double v : sol.y) r.negativity = std::max(r.negativity, -v);
  for (double v : sol.z) r.negativity = std::max(r.negativity, -v);
  r.negativity = std::max(r.negativity, -c.lambda);
  return r;
}

// Checks the documented FlowSolution invariants; returns the names of the
// violated ones (empty when all hold).
inline std::vector<std::string> solution_violations(const Residuals& r) {
  std::vector<std::string> out;
  if (r.balance > 1e-8) out.push_back("balance");
  if (r.allocation > 1e-8) out.push_back("allocation");
  if (r.route_capacity > 1e-8) out.push_back("route_capacity");
  if (r.scenario_capacity > 1e-8) out.push_back("scenario_capacity");
  if (r.certificate_h > 1e-10) out.push_back("certificate_h");
  if (r.certificate_value > 1e-6) out.push_back("certificate_value");
  if (r.certificate_domain > 1e-8) out.push_back("certificate_domain");
  if (r.negativity > 1e-12) out.push_back("negativity");
  return out;
}

namespace detail {

// Linear maximization oracle over the reformulated polytope, warm-started
// across calls. For EVaR, vertices violating the conjugate constraint are
// cut off and the LP re-solved.
class PolytopeOracle {
 public:
  PolytopeOracle(const FairProblem& prob, const Reformulation& ref)
      : prob_(prob), ref_(ref), solver_(ref.lp, prob.config.lp) {}

  // Maximizes weights'x over the polytope; returns the full decision vector.
  Vec maximize(std::span<const double> x_weights) {
    const VariableLayout& L = ref_.layout;
    Vec c(L.total, 0.0);
    const double scale = std::max(norm_inf(x_weights), 1e-300);
    for (std::size_t k = 0; k < L.communities; ++k) c[L.x + k] = x_weights[k] / scale;
    solver_.set_objective(c, lp::Sense::Maximize);
    for (;;) {
      const lp::LpResult res = solver_.solve();
      lp_iterations_ += res.iterations;
      if (res.status == lp::Status::Infeasible) {
        throw InfeasibleError(
            "no routing meets the allocation floor x >= " + std::to_string(prob_.x_min) +
            " under the risk constraint (" + to_string(prob_.risk.kind) + ", delta=" +
            std::to_string(prob_.risk.delta) + ", epsilon=" + std::to_string(prob_.risk.epsilon) + ")");
      }
      if (res.status == lp::Status::Unbounded) throw SolverError("oracle linear program is unbounded");
      if (!ref_.has_conic) return res.x;

      // EVaR: judge the vertex by its inflation levels h. If rho(h) fits the
      // budget, replace the free certificate coordinates by the dual optimum
      // at h (same x, y, z, so the point stays optimal for the oracle);
      // otherwise cut it off with the supporting hyperplane at the maximizing
      // envelope distribution q*, which forces q*'h <= epsilon.
      Vec v = res.x;
      const VariableLayout& L = ref_.layout;
      Vec h(v.begin() + L.h, v.begin() + L.h + L.scenarios);
      for (double& t : h) t = std::max(t, 0.0);
      const auto& p = prob_.scenarios.prob;
      const auto dp = evar_dual_minimizer(h, p, prob_.risk.delta);
      const double lambda = std::clamp(dp.lambda, prob_.config.lambda_min, ref_.lambda_max);
      for (std::size_t i = 0; i < L.scenarios; ++i) v[L.w + i] = h[i];
      for (std::size_t i = 0; i < L.scenarios; ++i) v[L.h + i] = h[i];
      v[L.nu] = 0.0;
      v[L.lambda] = lambda;
      const double viol = certificate_value(prob_.risk, p, h, lambda, 0.0).value - prob_.risk.epsilon;
      if (viol <= prob_.config.cut_tol) return v;
      if (cuts_ >= prob_.config.cut_budget) {
        if (viol <= prob_.config.cut_accept_tol) return v;
        throw SolverError("cut budget exhausted with conjugate constraint violated by " +
                          std::to_string(viol));
      }
      Vec q;
      if (lambda < dp.lambda) {
        // lambda capped: tangent at the capped point.
        q.resize(L.scenarios);
        const double mx = *std::max_element(h.begin(), h.end());
        double s = 0.0;
        for (std::size_t i = 0; i < L.scenarios; ++i) s += q[i] = p[i] * std::exp((h[i] - mx) / lambda);
        for (double& qi : q) qi /= s;
      } else {
        q = rho_primal(h, p, RiskKind::EVaR, prob_.risk.delta).maximizing_q;
      }
      solver_.add_inequality(evar_cut_row(L, q, p, prob_.risk.delta), prob_.risk.epsilon);
      ++cuts_;
    }
  }

  std::size_t cuts() const { return cuts_; }
  std::size_t lp_iterations() const { return lp_iterations_; }

 private:
  const FairProblem& prob_;
  const Reformulation& ref_;
  lp::SimplexSolver solver_;
  std::size_t cuts_ = 0;
  std::size_t lp_iterations_ = 0;
};

inline FlowSolution unpack(const Reformulation& ref, const Vec& v) {
  const VariableLayout& L = ref.layout;
  FlowSolution s;
  auto slice = [&](std::size_t at, std::size_t len) { return Vec(v.begin() + at, v.begin() + at + len); };
  s.y = slice(L.y, L.links);
  s.z = slice(L.z, L.routes);
  for (double& t : s.y) t = std::max(t, 0.0);
  for (double& t : s.z) t = std::max(t, 0.0);
  s.x = multiply(ref.incidence.H, s.z);  // x = Hz exactly
  s.certificate.w = slice(L.w, L.scenarios);
  s.certificate.lambda = std::max(v[L.lambda], 0.0);
  s.certificate.nu = v[L.nu];
  s.certificate.h = slice(L.h, L.scenarios);
  for (double& t : s.certificate.h) t = std::max(t, 0.0);
  return s;
}

inline Vec x_part(const Reformulation& ref, std::span<const double> v) {
  return Vec(v.begin() + ref.layout.x, v.begin() + ref.layout.x + ref.layout.communities);
}

// Maximizes t -> sum psi(x + t d) over [0, t_max] by bisection on the
// derivative (the restriction is concave).
inline double line_search(std::span<const double> x, std::span<const double> d, double alpha, double t_max,
                          double tol) {
  auto slope = [&](double t) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (d[k] != 0.0) s += alpha_utility_grad(x[k] + t * d[k], alpha) * d[k];
    }
    return s;
  };
  if (slope(0.0) <= 0.0) return 0.0;
  if (slope(t_max) >= 0.0) return t_max;
  double lo = 0.0, hi = t_max;
  while (hi - lo > tol * t_max) {
    const double mid = 0.5 * (lo + hi);
    if (slope(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Maximizes sum_k psi((X' theta)_k) over the simplex of atom weights with an
// active-set projected Newton method. Atoms are rows of `atoms`.
inline void solve_master(const std::vector<Vec>& atoms, Vec& theta, double alpha, double tol) {
  const std::size_t m = atoms.size();
  const std::size_t nc = atoms.front().size();
  auto mix = [&](const Vec& th) {
    Vec x(nc, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (th[j] == 0.0) continue;
      for (std::size_t k = 0; k < nc; ++k) x[k] += th[j] * atoms[j][k];
    }
    return x;
  };

  bool stalled = false;  // last Newton step made no progress
  for (int iter = 0; iter < 500; ++iter) {
    const Vec x = mix(theta);
    Vec gx(nc), curv(nc);
    for (std::size_t k = 0; k < nc; ++k) {
      gx[k] = alpha_utility_grad(x[k], alpha);
      curv[k] = alpha * gx[k] / x[k];  // -psi''
    }
    Vec g(m);
    for (std::size_t j = 0; j < m; ++j) g[j] = dot(atoms[j], gx);
    double mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean += theta[j] * g[j];

    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < m; ++j) {
      if (theta[j] > 0.0) support.push_back(j);
    }
    double spread = 0.0;
    for (std::size_t j : support) spread = std::max(spread, std::abs(g[j] - mean));
    const double scale = 1.0 + std::abs(mean);
    if (stalled || spread <= tol * scale) {
      // Stationary on the support; admit the most promising outside atom
      // with a line-searched step toward it. Newton then works on strictly
      // positive weights only.
      stalled = false;
      std::size_t add = m;
      double best = tol * scale;
      for (std::size_t j = 0; j < m; ++j) {
        if (theta[j] == 0.0 && g[j] - mean > best) {
          best = g[j] - mean;
          add = j;
        }
      }
      if (add == m) {
        if (spread <= tol * scale) return;
        // Newton stalled short of stationarity (nearly dependent atoms):
        // shift weight from the worst support atom to the best one.
        std::size_t lo = support.front(), hi = support.front();
        for (std::size_t j : support) {
          if (g[j] < g[lo]) lo = j;
          if (g[j] > g[hi]) hi = j;
        }
        Vec dx(nc);
        for (std::size_t k = 0; k < nc; ++k) dx[k] = theta[lo] * (atoms[hi][k] - atoms[lo][k]);
        const double t = norm_inf(dx) == 0.0 ? 0.0 : line_search(x, dx, alpha, 1.0, 1e-14);
        if (t == 0.0) return;
        const double moved = t * theta[lo];
        theta[lo] -= moved;
        theta[hi] += moved;
        if (t >= 1.0) theta[lo] = 0.0;
        continue;
      }
      Vec dx(nc);
      for (std::size_t k = 0; k < nc; ++k) dx[k] = atoms[add][k] - x[k];
      const double t = line_search(x, dx, alpha, 1.0, 1e-14);
      if (t == 0.0) return;
      for (double& th : theta) th *= 1.0 - t;
      theta[add] += t;
      continue;
    }

    // Newton direction on the support, restricted to sum(d) = 0.
    const std::size_t s = support.size();
    std::vector<Vec> M(s, Vec(s, 0.0));
    double trace = 0.0;
    for (std::size_t a = 0; a < s; ++a) {
      for (std::size_t b = a; b < s; ++b) {
        double v = 0.0;
        for (std::size_t k = 0; k < nc; ++k) v += atoms[support[a]][k] * curv[k] * atoms[support[b]][k];
        M[a][b] = M[b][a] = v;
      }
      trace += M[a][a];
    }
    const double ridge = 1e-10 * (trace / static_cast<double>(s)) + 1e-300;
    for (std::size_t a = 0; a < s; ++a) M[a][a] += ridge;
    // Cholesky solve for M^-1 g_S and M^-1 1.
    std::vector<Vec> Lc(s, Vec(s, 0.0));
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double v = M[i][j];
        for (std::size_t k = 0; k < j; ++k) v -= Lc[i][k] * Lc[j][k];
        if (i == j) {
          Lc[i][i] = std::sqrt(std::max(v, 1e-300));
        } else {
          Lc[i][j] = v / Lc[j][j];
        }
      }
    }
    auto chol_solve = [&](Vec b) {
      for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= Lc[i][k] * b[k];
        b[i] /= Lc[i][i];
      }
      for (std::size_t i = s; i-- > 0;) {
        for (std::size_t k = i + 1; k < s; ++k) b[i] -= Lc[k][i] * b[k];
        b[i] /= Lc[i][i];
      }
      return b;
    };
    Vec gs(s);
    for (std::size_t a = 0; a < s; ++a) gs[a] = g[support[a]];
    const Vec mg = chol_solve(gs);
    const Vec m1 = chol_solve(Vec(s, 1.0));
    const double eta = sum(mg) / sum(m1);
    Vec d(m, 0.0);
    for (std::size_t a = 0; a < s; ++a) d[support[a]] = mg[a] - eta * m1[a];

    double t_max = kInfinity;
    std::size_t blocking = m;
    for (std::size_t j : support) {
      if (d[j] < 0.0 && theta[j] / -d[j] < t_max) {
        t_max = theta[j] / -d[j];
        blocking = j;
      }
    }
    const Vec dx = mix(d);
    if (norm_inf(dx) == 0.0 || t_max == kInfinity) {
      stalled = true;
      continue;
    }
    const double t = line_search(x, dx, alpha, t_max, 1e-14);
    if (t == 0.0) {
      stalled = true;
      continue;
    }
    for (std::size_t j : support) theta[j] += t * d[j];
    if (t >= t_max * (1.0 - 1e-12) && blocking < m) theta[blocking] = 0.0;
    double total = 0.0;
    for (double& th : theta) {
      th = std::max(th, 0.0);
      total += th;
    }
    for (double& th : theta) th /= total;
  }
}

}  // namespace detail

// Frank-Wolfe on the alpha-fair objective.
inline std::pair<FlowSolution, SolveReport> solve_fair(const FairProblem& prob) {
  const auto start = std::chrono::steady_clock::now();
  const Reformulation ref = build_reformulation(prob);
  const SolverConfig& cfg = prob.config;
  const double alpha = prob.alpha;
  detail::PolytopeOracle oracle(prob, ref);

  SolveReport rep;
  rep.objective_kind = "alpha-fair";
  rep.alpha = alpha;

  // Start from the vertex maximizing total allocation; it also serves as
  // the feasibility preflight for the allocation floor.
  Vec v = oracle.maximize(Vec(ref.layout.communities, 1.0));
  Vec x = detail::x_part(ref, v);

  std::vector<Vec> atoms_full{v};
  std::vector<Vec> atoms_x{x};
  Vec theta{1.0};

  double best_gap = kInfinity;
  for (std::size_t it = 0;; ++it) {
    Vec grad(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) grad[k] = alpha_utility_grad(x[k], alpha);
    const Vec s = oracle.maximize(grad);
    const Vec sx = detail::x_part(ref, s);
    Vec d(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) d[k] = sx[k] - x[k];
    const double gap = std::max(dot(grad, d), 0.0);
    best_gap = std::min(best_gap, gap);
    rep.gap_trace.push_back(gap);
    rep.best_gap_trace.push_back(best_gap);
    rep.objective_trace.push_back(total_utility(x, alpha));
    rep.final_gap = gap;
    if (gap <= cfg.gap_tol || it >= cfg.max_iterations) break;
    rep.iterations = it + 1;

    switch (cfg.step_rule) {
      case StepRule::LineSearch:
      case StepRule::Classic: {
        const double gamma = cfg.step_rule == StepRule::Classic
                                 ? 2.0 / (static_cast<double>(it) + 2.0)
                                 : detail::line_search(x, d, alpha, 1.0, cfg.line_search_tol);
        for (std::size_t j = 0; j < v.size(); ++j) v[j] += gamma * (s[j] - v[j]);
        x = detail::x_part(ref, v);
        break;
      }
      case StepRule::FullyCorrective: {
        // The objective sees only x, so atoms are identified by their x part.
        bool known = false;
        for (const Vec& a : atoms_x) known = known || a == sx;
        if (!known) {
          atoms_full.push_back(s);
          atoms_x.push_back(sx);
          theta.push_back(0.0);
        }
        if (alpha == 0.0) {
          // Linear objective: the oracle vertex is optimal.
          theta.assign(theta.size(), 0.0);
          for (std::size_t j = 0; j < atoms_x.size(); ++j) {
            if (atoms_x[j] == sx) {
              theta[j] = 1.0;
              break;
            }
          }
        } else {
          detail::solve_master(atoms_x, theta, alpha, 1e-12);
        }
        // Drop atoms that left the active set.
        std::vector<Vec> keep_full, keep_x;
        Vec keep_theta;
        for (std::size_t j = 0; j < theta.size(); ++j) {
          if (theta[j] > 0.0) {
            keep_full.push_back(std::move(atoms_full[j]));
            keep_x.push_back(std::move(atoms_x[j]));
            keep_theta.push_back(theta[j]);
          }
        }
        atoms_full = std::move(keep_full);
        atoms_x = std::move(keep_x);
        theta = std::move(keep_theta);
        v.assign(v.size(), 0.0);
        for (std::size_t j = 0; j < atoms_full.size(); ++j) {
          for (std::size_t i = 0; i < v.size(); ++i) v[i] += theta[j] * atoms_full[j][i];
        }
        x = detail::x_part(ref, v);
        break;
      }
    }
  }

  FlowSolution sol = detail::unpack(ref, v);
  rep.objective = total_utility(sol.x, alpha);
  rep.lp_iterations = oracle.lp_iterations();
  rep.cuts_added = oracle.cuts();
  rep.residuals = check_solution(prob, ref.incidence, sol);
  rep.fairness = fairness_metrics(sol.x);
  rep.rho = risk_of_flow(ref.incidence.K, sol.y, prob.scenarios, prob.risk.kind, prob.risk.delta).rho;
  rep.certificate_rho = certificate_value(prob.risk, prob.scenarios.prob, sol.certificate.w,
                                          sol.certificate.lambda, sol.certificate.nu)
                            .value;
  rep.lambda_bound_active = sol.certificate.lambda >= ref.lambda_max * (1.0 - 1e-9);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(sol), std::move(rep)};
}

// Maximizes total served demand sum_k x_k over the same constraint system.
inline std::pair<FlowSolution, SolveReport> solve_maxsum(const FairProblem& prob) {
  const auto start = std::chrono::steady_clock::now();
  const Reformulation ref = build_reformulation(prob);
  detail::PolytopeOracle oracle(prob, ref);
  const Vec v = oracle.maximize(Vec(ref.layout.communities, 1.0));

  SolveReport rep;
  rep.objective_kind = "max-sum";
  rep.alpha = 0.0;
  FlowSolution sol = detail::unpack(ref, v);
  rep.objective = sum(sol.x);
  rep.gap_trace = {0.0};
  rep.best_gap_trace = {0.0};
  rep.objective_trace = {rep.objective};
  rep.lp_iterations = oracle.lp_iterations();
  rep.cuts_added = oracle.cuts();
  rep.residuals = check_solution(prob, ref.incidence, sol);
  rep.fairness = fairness_metrics(sol.x);
  rep.rho = risk_of_flow(ref.incidence.K, sol.y, prob.scenarios, prob.risk.kind, prob.risk.delta).rho;
  rep.certificate_rho = certificate_value(prob.risk, prob.scenarios.prob, sol.certificate.w,
                                          sol.certificate.lambda, sol.certificate.nu)
                            .value;
  rep.lambda_bound_active = sol.certificate.lambda >= ref.lambda_max * (1.0 - 1e-9);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(sol), std::move(rep)};
}

struct FairnessCheck {
  double tolerance = 0.0;
  std::size_t samples = 0;
  double worst = -kInfinity;  // max over samples of sum_k (x_k - x*_k) / (x*_k)^alpha
  std::vector<std::pair<std::size_t, double>> violations;  // (sample index, value)
  bool passed() const { return violations.empty(); }
};

// Samples feasible allocations (maximizers of random linear objectives over
// the constraint system) and evaluates the alpha-fairness inequality
// sum_k (x_k - x*_k) / (x*_k)^alpha <= tol at each. tol < 0 selects
// 10 * gap_tol * n_c.
inline FairnessCheck check_alpha_fairness(std::span<const double> x_star, const FairProblem& prob,
                                          std::size_t samples, std::uint64_t seed = 1, double tol = -1.0) {
  for (double v : x_star) {
    if (!(v > 0.0)) throw DomainError("check_alpha_fairness: x* must be positive");
  }
  const Reformulation ref = build_reformulation(prob);
  if (x_star.size() != ref.layout.communities) throw DimensionError("check_alpha_fairness: x* length");
  detail::PolytopeOracle oracle(prob, ref);
  FairnessCheck out;
  out.samples = samples;
  out.tolerance = tol >= 0.0 ? tol
                             : 10.0 * prob.config.gap_tol * static_cast<double>(ref.layout.communities);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.25, 1.0);
  for (std::size_t sidx = 0; sidx < samples; ++sidx) {
    Vec wts(ref.layout.communities);
    for (double& w : wts) w = u(rng);
    const Vec v = oracle.maximize(wts);
    const Vec x = multiply(ref.incidence.H, Vec(v.begin() + ref.layout.z,
                                                 v.begin() + ref.layout.z + ref.layout.routes));
    double val = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      val += (x[k] - x_star[k]) / std::pow(x_star[k], prob.alpha);
    }
    out.worst = std::max(out.worst, val);
    if (val > out.tolerance) out.violations.emplace_back(sidx, val);
  }
  return out;
}

}  // namespace uamfair
