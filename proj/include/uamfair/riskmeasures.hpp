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

// Scenario capacity model and coherent risk measures of the capacity
// violation level.
//
// For a vehicle flow y and scenario i with capacities (c^i, d^i) the
// violation level h*_i is the smallest h >= 0 with K y <= (1 + h) c^i and
// y <= (1 + h) d^i. The risk of the flow is
//
//     rho(y) = max { q'h* : q in Q(delta) },   Q(delta) = {q in simplex : g(q) <= 0}
//
// for the CVaR, EVaR and total-variation envelopes g. rho_primal solves the
// maximization directly; rho_dual solves the conjugate-based minimization
// over (w, lambda, nu). The two must agree.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "uamfair/errors.hpp"
#include "uamfair/linalg.hpp"
#include "uamfair/lpcore.hpp"
#include "uamfair/network.hpp"

namespace uamfair {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class RiskKind { CVaR, EVaR, TV };

inline std::string to_string(RiskKind k) {
  switch (k) {
    case RiskKind::CVaR: return "cvar";
    case RiskKind::EVaR: return "evar";
    case RiskKind::TV: return "tv";
  }
  return "?";
}

inline RiskKind parse_risk_kind(const std::string& s) {
  std::string t = s;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (t == "cvar") return RiskKind::CVaR;
  if (t == "evar") return RiskKind::EVaR;
  if (t == "tv") return RiskKind::TV;
  throw InputError("unknown risk measure '" + s + "' (expected cvar, evar or tv)");
}

struct ScenarioSet {
  std::vector<Vec> node_caps;  // c^i, vehicles/hour per node
  std::vector<Vec> link_caps;  // d^i, vehicles/hour per link
  Vec prob;

  std::size_t size() const { return prob.size(); }
  bool operator==(const ScenarioSet&) const = default;
};

inline std::vector<Violation> validate_scenarios(const ScenarioSet& s, std::size_t node_count,
                                                 std::size_t link_count) {
  std::vector<Violation> out;
  auto add = [&out](std::string m) { out.push_back({std::move(m)}); };
  if (s.prob.empty()) add("scenario set is empty");
  if (s.node_caps.size() != s.prob.size() || s.link_caps.size() != s.prob.size()) {
    add("scenario arrays have inconsistent lengths");
    return out;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::string id = "scenario " + std::to_string(i + 1);
    if (!(s.prob[i] > 0.0) || !std::isfinite(s.prob[i])) {
      add(id + ": probability must be positive");
    }
    total += s.prob[i];
    if (s.node_caps[i].size() != node_count) {
      add(id + ": node_caps has " + std::to_string(s.node_caps[i].size()) + " entries, expected " +
          std::to_string(node_count));
    }
    if (s.link_caps[i].size() != link_count) {
      add(id + ": link_caps has " + std::to_string(s.link_caps[i].size()) + " entries, expected " +
          std::to_string(link_count));
    }
    for (double c : s.node_caps[i]) {
      if (!(c >= 0.0) || !std::isfinite(c)) {
        add(id + ": node capacity must be finite and nonnegative");
        break;
      }
    }
    for (double d : s.link_caps[i]) {
      if (!(d >= 0.0) || !std::isfinite(d)) {
        add(id + ": link capacity must be finite and nonnegative");
        break;
      }
    }
  }
  if (!s.prob.empty() && std::abs(total - 1.0) > 1e-9) {
    add("scenario probabilities sum to " + std::to_string(total) + ", expected 1");
  }
  return out;
}

struct RiskSpec {
  RiskKind kind = RiskKind::CVaR;
  double delta = 0.5;
  double epsilon = 0.1;
};

inline void check_delta(RiskKind kind, double delta) {
  if (!std::isfinite(delta)) throw DomainError("delta must be finite");
  if (kind == RiskKind::TV) {
    if (delta < 0.0 || delta > 1.0) throw DomainError("tv: delta must lie in [0, 1]");
  } else if (delta <= 0.0 || delta >= 1.0) {
    throw DomainError(to_string(kind) + ": delta must lie in (0, 1)");
  }
}

inline void validate(const RiskSpec& spec) {
  check_delta(spec.kind, spec.delta);
  if (!(spec.epsilon >= 0.0) || !std::isfinite(spec.epsilon)) {
    throw DomainError("epsilon must be finite and nonnegative");
  }
}

namespace detail {

inline void check_prob(std::span<const double> p) {
  if (p.empty()) throw DimensionError("empty probability vector");
  for (double v : p) {
    if (!(v > 0.0)) throw DomainError("scenario probabilities must be positive");
  }
}

// ln(sum_i p_i exp(r_i)) without overflow.
inline double log_mean_exp(std::span<const double> r, std::span<const double> p) {
  const double mx = *std::max_element(r.begin(), r.end());
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s += p[i] * std::exp(r[i] - mx);
  return mx + std::log(s);
}

}  // namespace detail

// h*_i for one scenario, in closed form. Returns +inf when an element with
// zero capacity carries positive flow (no finite inflation fixes that).
inline double violation_level(const Matrix& K, std::span<const double> y,
                              std::span<const double> node_caps, std::span<const double> link_caps) {
  if (node_caps.size() != K.rows() || link_caps.size() != y.size()) {
    throw DimensionError("violation_level: capacity dimensions do not match the network");
  }
  const Vec ky = multiply(K, y);
  double h = 0.0;
  for (std::size_t j = 0; j < ky.size(); ++j) {
    if (node_caps[j] > 0.0) {
      h = std::max(h, ky[j] / node_caps[j] - 1.0);
    } else if (ky[j] > 0.0) {
      return kInfinity;
    }
  }
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (link_caps[k] > 0.0) {
      h = std::max(h, y[k] / link_caps[k] - 1.0);
    } else if (y[k] > 0.0) {
      return kInfinity;
    }
  }
  return h;
}

inline Vec violation_levels(const Matrix& K, std::span<const double> y, const ScenarioSet& s) {
  Vec h(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    h[i] = violation_level(K, y, s.node_caps[i], s.link_caps[i]);
  }
  return h;
}

// Envelope function g_delta(q); Q(delta) is its zero sublevel set on the simplex.
inline double envelope_g(RiskKind kind, double delta, std::span<const double> q,
                         std::span<const double> p) {
  check_delta(kind, delta);
  detail::check_prob(p);
  if (q.size() != p.size()) throw DimensionError("envelope_g: q and p differ in length");
  switch (kind) {
    case RiskKind::CVaR: {
      double mx = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) mx = std::max(mx, std::abs(q[i]) / p[i]);
      return mx - 1.0 / (1.0 - delta);
    }
    case RiskKind::EVaR: {
      double total = 0.0;
      for (double v : q) {
        if (v < 0.0) return kInfinity;
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-12 * static_cast<double>(q.size())) return kInfinity;
      double kl = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] > 0.0) kl += q[i] * std::log(q[i] / p[i]);
      }
      return kl + std::log1p(-delta);
    }
    case RiskKind::TV: {
      double d = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) d += std::abs(q[i] - p[i]);
      return d - 2.0 * delta;
    }
  }
  return kInfinity;
}

// Convex conjugate g*_delta(r) = sup_q r'q - g_delta(q).
inline double conjugate_g(RiskKind kind, double delta, std::span<const double> r,
                          std::span<const double> p) {
  check_delta(kind, delta);
  detail::check_prob(p);
  if (r.size() != p.size()) throw DimensionError("conjugate_g: r and p differ in length");
  switch (kind) {
    case RiskKind::CVaR: {
      double s = 0.0;
      for (std::size_t i = 0; i < r.size(); ++i) s += p[i] * std::abs(r[i]);
      return s <= 1.0 ? 1.0 / (1.0 - delta) : kInfinity;
    }
    case RiskKind::EVaR:
      return -std::log1p(-delta) + detail::log_mean_exp(r, p);
    case RiskKind::TV:
      return norm_inf(r) <= 1.0 ? 2.0 * delta + dot(r, p) : kInfinity;
  }
  return kInfinity;
}

struct RiskEvaluation {
  Vec h_star;
  double rho = 0.0;
  Vec maximizing_q;
};

namespace detail {

inline void check_h(std::span<const double> h, std::span<const double> p) {
  check_prob(p);
  if (h.size() != p.size()) throw DimensionError("violation levels and probabilities differ in length");
  for (double v : h) {
    if (v == kInfinity) throw DomainError("hard-infeasible scenario");
    if (!std::isfinite(v)) throw DomainError("non-finite violation level");
  }
}

// Gibbs tilt q_i ~ p_i exp(h_i / lambda), and its KL divergence from p.
struct Tilt {
  Vec q;
  double kl = 0.0;
};

inline Tilt tilt(std::span<const double> h, std::span<const double> p, double lambda) {
  const double mx = *std::max_element(h.begin(), h.end());
  Tilt t;
  t.q.resize(h.size());
  Vec u(h.size());
  double em1 = 0.0;  // sum p_i (exp(u_i) - 1), accurate when all u_i are tiny
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    u[i] = (h[i] - mx) / lambda;
    t.q[i] = p[i] * std::exp(u[i]);
    s += t.q[i];
    em1 += p[i] * std::expm1(u[i]);
  }
  const double log_s = s > 0.5 ? std::log1p(em1) : std::log(s);
  for (std::size_t i = 0; i < h.size(); ++i) {
    t.q[i] /= s;
    if (t.q[i] > 0.0) t.kl += t.q[i] * (u[i] - log_s);
  }
  t.kl = std::max(t.kl, 0.0);
  return t;
}

// lambda * ln(p' exp(h / lambda) / (1 - delta)), evaluated stably.
inline double evar_dual_objective(std::span<const double> h, std::span<const double> p, double delta,
                                  double lambda) {
  const double mx = *std::max_element(h.begin(), h.end());
  double em1 = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double u = (h[i] - mx) / lambda;
    em1 += p[i] * std::expm1(u);
    s += p[i] * std::exp(u);
  }
  const double log_s = s > 0.5 ? std::log1p(em1) : std::log(s);
  return mx + lambda * log_s - lambda * std::log1p(-delta);
}

}  // namespace detail

// Maximizes q'h over Q(delta) directly.
//  - CVaR: the envelope is {q : q_i <= p_i / (1 - delta)}; fill the largest
//    violation levels first.
//  - TV: move up to delta probability mass from the smallest levels onto the
//    largest one.
//  - EVaR: the maximizer is the Gibbs tilt of p whose KL divergence equals
//    -ln(1 - delta); the temperature is found by bisection.
// Ties go to the lowest scenario index.
inline RiskEvaluation rho_primal(std::span<const double> h, std::span<const double> p, RiskKind kind,
                                 double delta) {
  check_delta(kind, delta);
  detail::check_h(h, p);
  const std::size_t n = h.size();
  RiskEvaluation ev;
  ev.h_star.assign(h.begin(), h.end());
  Vec q(n, 0.0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  switch (kind) {
    case RiskKind::CVaR: {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h[a] > h[b]; });
      double remaining = 1.0;
      for (std::size_t i : order) {
        const double take = std::min(p[i] / (1.0 - delta), remaining);
        q[i] = take;
        remaining -= take;
        if (remaining <= 0.0) break;
      }
      break;
    }
    case RiskKind::TV: {
      q.assign(p.begin(), p.end());
      const std::size_t top = static_cast<std::size_t>(std::max_element(h.begin(), h.end()) - h.begin());
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h[a] < h[b]; });
      double budget = delta;
      for (std::size_t i : order) {
        if (budget <= 0.0 || h[i] >= h[top]) break;
        const double move = std::min(q[i], budget);
        q[i] -= move;
        q[top] += move;
        budget -= move;
      }
      break;
    }
    case RiskKind::EVaR: {
      const double mx = *std::max_element(h.begin(), h.end());
      const double target = -std::log1p(-delta);
      double top_mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (h[i] == mx) top_mass += p[i];
      }
      if (target >= -std::log(top_mass)) {
        // The worst-case vertex (all mass on the largest levels) is inside Q.
        for (std::size_t i = 0; i < n; ++i) q[i] = h[i] == mx ? p[i] / top_mass : 0.0;
        break;
      }
      const double mn = *std::min_element(h.begin(), h.end());
      const double range = mx - mn;
      double lo = range, hi = range;
      for (int k = 0; k < 4000 && detail::tilt(h, p, lo).kl <= target; ++k) lo *= 0.5;
      for (int k = 0; k < 4000 && detail::tilt(h, p, hi).kl >= target; ++k) hi *= 2.0;
      // KL of the tilt decreases in the temperature.
      for (int k = 0; k < 200 && hi > lo * (1.0 + 1e-15); ++k) {
        const double mid = std::sqrt(lo * hi);
        if (detail::tilt(h, p, mid).kl > target) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      q = detail::tilt(h, p, std::sqrt(lo * hi)).q;
      break;
    }
  }
  ev.rho = dot(q, h);
  ev.maximizing_q = std::move(q);
  return ev;
}

struct DualOptions {
  double golden_rel_width = 1e-10;
};

struct EvarDualPoint {
  double lambda = 0.0;  // 0 when the infimum is approached as lambda -> 0+
  double value = 0.0;
};

// Minimizes lambda ln(p' exp(h / lambda) / (1 - delta)) over lambda > 0 by
// golden-section search in log(lambda).
inline EvarDualPoint evar_dual_minimizer(std::span<const double> h, std::span<const double> p, double delta,
                                         DualOptions options = {}) {
  check_delta(RiskKind::EVaR, delta);
  detail::check_h(h, p);
  const double mx = *std::max_element(h.begin(), h.end());
  const double mn = *std::min_element(h.begin(), h.end());
  const double range = mx - mn;
  if (range == 0.0) return {0.0, mx};
  auto f = [&](double t) { return detail::evar_dual_objective(h, p, delta, std::exp(t)); };
  double lo = std::log(1e-6 * range + 1e-12);
  double hi = std::log(10.0 * range + 1.0);
  // f is convex in lambda; widen the bracket until both ends go uphill.
  for (int k = 0; k < 2000 && f(lo - 1.0) < f(lo); ++k) lo -= 1.0;
  for (int k = 0; k < 2000 && f(hi + 1.0) < f(hi); ++k) hi += 1.0;
  lo -= 1.0;
  hi += 1.0;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > options.golden_rel_width) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  EvarDualPoint best{std::exp(c), fc};
  if (fd < best.value) best = {std::exp(d), fd};
  const double fm = f(0.5 * (a + b));
  if (fm < best.value) best = {std::exp(0.5 * (a + b)), fm};
  // lambda -> 0+ gives max h; lambda -> inf diverges for delta > 0.
  if (mx <= best.value) best = {0.0, mx};
  return best;
}

// Optimal value of  min lambda g*(w / lambda) - nu  s.t.  w - nu 1 >= h,
// lambda >= 0. CVaR and TV reduce to linear programs once the conjugate's
// domain is written as constraints; EVaR reduces to a one-dimensional
// convex minimization over lambda, solved by golden-section search in
// log(lambda).
inline double rho_dual(std::span<const double> h, std::span<const double> p, RiskKind kind,
                       double delta, DualOptions options = {}) {
  check_delta(kind, delta);
  detail::check_h(h, p);
  const std::size_t n = h.size();

  if (kind == RiskKind::EVaR) return evar_dual_minimizer(h, p, delta, options).value;

  // Variables: w (n), lambda, nu, then for CVaR t (n) with t_i >= |p_i w_i|.
  const std::size_t iw = 0, il = n, inu = n + 1, it = n + 2;
  const bool cvar = kind == RiskKind::CVaR;
  const std::size_t nv = cvar ? 2 * n + 2 : n + 2;
  const std::size_t rows = cvar ? 3 * n + 1 : 3 * n;

  lp::LinearProgram prog;
  prog.objective.assign(nv, 0.0);
  prog.A = Matrix(rows, nv);
  prog.b.assign(rows, 0.0);
  prog.lower.assign(nv, -lp::kInf);
  prog.upper.assign(nv, lp::kInf);
  prog.lower[il] = 0.0;
  prog.objective[inu] = -1.0;

  std::size_t r = 0;
  for (std::size_t i = 0; i < n; ++i, ++r) {  // -w_i + nu <= -h_i
    prog.A(r, iw + i) = -1.0;
    prog.A(r, inu) = 1.0;
    prog.b[r] = -h[i];
  }
  if (cvar) {
    prog.objective[il] = 1.0 / (1.0 - delta);
    const std::size_t budget_row = rows - 1;  // sum t <= lambda
    for (std::size_t i = 0; i < n; ++i) {
      prog.lower[it + i] = 0.0;
      prog.A(r, iw + i) = p[i];
      prog.A(r++, it + i) = -1.0;
      prog.A(r, iw + i) = -p[i];
      prog.A(r++, it + i) = -1.0;
      prog.A(budget_row, it + i) = 1.0;
    }
    prog.A(budget_row, il) = -1.0;
  } else {
    prog.objective[il] = 2.0 * delta;
    for (std::size_t i = 0; i < n; ++i) {
      prog.objective[iw + i] = p[i];
      prog.A(r, iw + i) = 1.0;
      prog.A(r++, il) = -1.0;
      prog.A(r, iw + i) = -1.0;
      prog.A(r++, il) = -1.0;
    }
  }
  const lp::LpResult res = lp::lp_solve(prog);
  if (res.status != lp::Status::Optimal) {
    throw SolverError(std::string("rho_dual: linear program ") + lp::to_string(res.status));
  }
  return res.objective;
}

// Risk of a vehicle flow: h* per scenario followed by rho_primal.
inline RiskEvaluation risk_of_flow(const Matrix& K, std::span<const double> y, const ScenarioSet& s,
                                   RiskKind kind, double delta) {
  return rho_primal(violation_levels(K, y, s), s.prob, kind, delta);
}

}  // namespace uamfair
