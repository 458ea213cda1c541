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

// Synthetic instances at the scale of the Austin experiment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "uamfair/errors.hpp"
#include "uamfair/linalg.hpp"
#include "uamfair/lpcore.hpp"
#include "uamfair/network.hpp"
#include "uamfair/riskmeasures.hpp"

namespace uamfair {

struct ReductionRule {
  double fraction = 0.0;     // uniform capacity reduction
  double probability = 0.0;
  bool operator==(const ReductionRule&) const = default;
};

struct CaseSpec {
  std::uint64_t seed = 0;
  std::size_t node_count = 17;
  std::size_t link_count = 72;   // directed; added in opposite pairs
  std::size_t route_count = 200;
  std::size_t community_count = 46;
  std::size_t max_route_length = 5;
  std::array<double, 2> node_capacity{50.0, 200.0};
  std::array<double, 2> link_capacity{20.0, 100.0};
  std::vector<ReductionRule> reductions{{0.2, 0.3}, {0.4, 0.2}};
  bool operator==(const CaseSpec&) const = default;
};

struct GeneratedCase {
  Network network;
  ScenarioSet scenarios;
  CaseSpec spec;  // provenance
};

inline void validate(const CaseSpec& s) {
  if (s.node_count < 2) throw InputError("case spec: node_count must be >= 2");
  if (s.link_count == 0 || s.link_count % 2 != 0) {
    throw InputError("case spec: link_count must be positive and even (links come in opposite pairs)");
  }
  if (s.route_count == 0) throw InputError("case spec: route_count must be positive");
  if (s.community_count == 0) throw InputError("case spec: community_count must be positive");
  if (s.max_route_length == 0) throw InputError("case spec: max_route_length must be >= 1");
  for (const auto& r : {s.node_capacity, s.link_capacity}) {
    if (!(r[0] > 0.0) || !(r[1] >= r[0]) || !std::isfinite(r[1])) {
      throw InputError("case spec: capacity range must satisfy 0 < lo <= hi");
    }
  }
  double total = 0.0;
  for (const auto& r : s.reductions) {
    if (!(r.fraction >= 0.0 && r.fraction < 1.0)) throw InputError("case spec: reduction fraction must be in [0, 1)");
    if (!(r.probability > 0.0)) throw InputError("case spec: reduction probability must be positive");
    total += r.probability;
  }
  if (total >= 1.0) throw InputError("case spec: reduction probabilities must leave a positive nominal probability");
}

// Nominal scenario with the residual probability, then one scenario per rule
// with capacities scaled by (1 - fraction).
inline ScenarioSet scenario_from_reductions(const Vec& node_caps, const Vec& link_caps,
                                            const std::vector<ReductionRule>& rules) {
  double used = 0.0;
  for (const auto& r : rules) {
    if (!(r.fraction >= 0.0 && r.fraction < 1.0)) throw InputError("reduction fraction must be in [0, 1)");
    if (!(r.probability >= 0.0)) throw InputError("reduction probability must be nonnegative");
    used += r.probability;
  }
  const double residual = 1.0 - used;
  if (residual < 0.0) throw InputError("reduction probabilities exceed 1 (residual " + std::to_string(residual) + ")");
  ScenarioSet s;
  s.node_caps.push_back(node_caps);
  s.link_caps.push_back(link_caps);
  s.prob.push_back(residual);
  for (const auto& r : rules) {
    Vec c = node_caps, d = link_caps;
    for (double& v : c) v *= 1.0 - r.fraction;
    for (double& v : d) v *= 1.0 - r.fraction;
    s.node_caps.push_back(std::move(c));
    s.link_caps.push_back(std::move(d));
    s.prob.push_back(r.probability);
  }
  return s;
}

namespace detail {

// Uniform draws with an explicit mapping so that cases do not depend on the
// standard library's distribution implementations.
class CaseRng {
 public:
  explicit CaseRng(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t index(std::size_t n) {
    return std::min(static_cast<std::size_t>(uniform() * static_cast<double>(n)), n - 1);
  }

 private:
  std::mt19937_64 eng_;
};

using Point = std::array<double, 2>;

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline bool on_segment(const Point& p, const Point& a, const Point& b) {
  return std::min(a[0], b[0]) <= p[0] && p[0] <= std::max(a[0], b[0]) && std::min(a[1], b[1]) <= p[1] &&
         p[1] <= std::max(a[1], b[1]);
}

}  // namespace detail

// True when segments ab and cd meet anywhere other than a shared endpoint.
inline bool segments_cross(const detail::Point& a, const detail::Point& b, const detail::Point& c,
                           const detail::Point& d) {
  using detail::cross;
  using detail::on_segment;
  const bool shared = a == c || a == d || b == c || b == d;
  const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
  if (shared) {
    // Touching at the common endpoint is fine; collinear overlap is not.
    if (d1 == 0.0 && d2 == 0.0) {
      const detail::Point& p = (a == c || a == d) ? b : a;
      const detail::Point& q = (c == a || c == b) ? d : c;
      return on_segment(p, c, d) || on_segment(q, a, b);
    }
    return false;
  }
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

namespace detail {

// Max-sum LP over balanced flow, route capacity and nominal capacity with
// every community at >= x_min. Used to reject route samples that cannot
// serve everyone.
inline bool preflight_feasible(const Network& net, const ScenarioSet& sc, double x_min) {
  const auto inc = build_incidence(net);
  const std::size_t nc = net.community_count, nl = net.link_count(), nr = net.route_count();
  const std::size_t nn = net.node_count;
  lp::LinearProgram lp;
  const std::size_t n = nc + nl + nr;
  lp.objective.assign(n, 0.0);
  lp.lower.assign(n, 0.0);
  for (std::size_t k = 0; k < nc; ++k) lp.lower[k] = x_min;
  lp.G = Matrix(nn + nc, n);
  lp.g.assign(nn + nc, 0.0);
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t k = 0; k < nl; ++k) lp.G(i, nc + k) = inc.E(i, k);
  }
  for (std::size_t c = 0; c < nc; ++c) {
    lp.G(nn + c, c) = 1.0;
    for (std::size_t r = 0; r < nr; ++r) lp.G(nn + c, nc + nl + r) = -inc.H(c, r);
  }
  const std::size_t rows = nl + nn + nl;
  lp.A = Matrix(rows, n);
  lp.b.assign(rows, 0.0);
  for (std::size_t k = 0; k < nl; ++k) {
    for (std::size_t r = 0; r < nr; ++r) lp.A(k, nc + nl + r) = inc.F(k, r);
    lp.A(k, nc + k) = -1.0;
  }
  for (std::size_t j = 0; j < nn; ++j) {
    for (std::size_t k = 0; k < nl; ++k) lp.A(nl + j, nc + k) = inc.K(j, k);
    lp.b[nl + j] = sc.node_caps[0][j];
  }
  for (std::size_t k = 0; k < nl; ++k) {
    lp.A(nl + nn + k, nc + k) = 1.0;
    lp.b[nl + nn + k] = sc.link_caps[0][k];
  }
  return lp::lp_solve(lp).status == lp::Status::Optimal;
}

}  // namespace detail

inline GeneratedCase generate(const CaseSpec& spec) {
  validate(spec);
  detail::CaseRng rng(spec.seed);
  const std::size_t nn = spec.node_count;

  std::vector<detail::Point> pts(nn);
  for (auto& p : pts) p = {rng.uniform(), rng.uniform()};

  // Greedy non-crossing undirected links by ascending length.
  struct Cand {
    double len;
    std::size_t a, b;
  };
  std::vector<Cand> cands;
  for (std::size_t a = 0; a < nn; ++a) {
    for (std::size_t b = a + 1; b < nn; ++b) {
      cands.push_back({std::hypot(pts[a][0] - pts[b][0], pts[a][1] - pts[b][1]), a, b});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.len < y.len; });
  const std::size_t pairs_wanted = spec.link_count / 2;
  std::vector<std::pair<std::size_t, std::size_t>> chosen;
  for (const Cand& c : cands) {
    if (chosen.size() == pairs_wanted) break;
    bool ok = true;
    for (const auto& [a, b] : chosen) {
      if (segments_cross(pts[c.a], pts[c.b], pts[a], pts[b])) {
        ok = false;
        break;
      }
    }
    if (ok) chosen.emplace_back(c.a, c.b);
  }
  if (chosen.size() < pairs_wanted) {
    throw InputError("case spec unsatisfiable: only " + std::to_string(2 * chosen.size()) +
                     " crossing-free directed links fit, " + std::to_string(spec.link_count) + " requested");
  }

  Network net;
  net.node_count = nn;
  net.coordinates = pts;
  for (const auto& [a, b] : chosen) {
    net.links.push_back({a, b});
    net.links.push_back({b, a});
  }
  const std::size_t nl = net.links.size();
  std::vector<std::vector<std::size_t>> out(nn);
  for (std::size_t k = 0; k < nl; ++k) out[net.links[k].tail].push_back(k);

  Vec node_caps(nn), link_caps(nl);
  for (double& v : node_caps) v = rng.uniform(spec.node_capacity[0], spec.node_capacity[1]);
  for (double& v : link_caps) v = rng.uniform(spec.link_capacity[0], spec.link_capacity[1]);
  ScenarioSet scenarios = scenario_from_reductions(node_caps, link_caps, spec.reductions);

  auto dist = [&](std::size_t a, std::size_t b) { return std::hypot(pts[a][0] - pts[b][0], pts[a][1] - pts[b][1]); };

  for (int attempt = 0; attempt < 20; ++attempt) {
    // Routes: distinct random simple walks.
    std::set<std::vector<std::size_t>> seen;
    std::vector<std::vector<std::size_t>> routes;
    const std::size_t max_tries = 1000 * spec.route_count;
    for (std::size_t tries = 0; routes.size() < spec.route_count && tries < max_tries; ++tries) {
      const std::size_t origin = rng.index(nn);
      const std::size_t len = 1 + rng.index(spec.max_route_length);
      std::vector<std::size_t> walk;
      std::vector<bool> visited(nn, false);
      visited[origin] = true;
      std::size_t at = origin;
      while (walk.size() < len) {
        std::vector<std::size_t> options;
        for (std::size_t k : out[at]) {
          if (!visited[net.links[k].head]) options.push_back(k);
        }
        if (options.empty()) break;
        const std::size_t k = options[rng.index(options.size())];
        walk.push_back(k);
        at = net.links[k].head;
        visited[at] = true;
      }
      if (walk.empty() || !seen.insert(walk).second) continue;
      routes.push_back(std::move(walk));
    }
    if (routes.size() < spec.route_count) {
      throw InputError("case spec unsatisfiable: only " + std::to_string(routes.size()) +
                       " distinct routes of length <= " + std::to_string(spec.max_route_length) + " found, " +
                       std::to_string(spec.route_count) + " requested");
    }

    // Communities: origin-destination pairs sampled without replacement from
    // the pairs the routes realize.
    using Od = std::pair<std::size_t, std::size_t>;
    auto od_of = [&](const std::vector<std::size_t>& r) {
      return Od{net.links[r.front()].tail, net.links[r.back()].head};
    };
    std::vector<Od> pool;
    {
      std::set<Od> s;
      for (const auto& r : routes) {
        if (s.insert(od_of(r)).second) pool.push_back(od_of(r));
      }
    }
    if (pool.size() < spec.community_count) {
      throw InputError("case spec unsatisfiable: routes realize only " + std::to_string(pool.size()) +
                       " origin-destination pairs, " + std::to_string(spec.community_count) +
                       " communities requested");
    }
    std::vector<Od> communities;
    for (std::size_t c = 0; c < spec.community_count; ++c) {
      const std::size_t pick = c + rng.index(pool.size() - c);
      std::swap(pool[c], pool[pick]);
      communities.push_back(pool[c]);
    }
    std::map<Od, std::size_t> od_index;
    for (std::size_t c = 0; c < communities.size(); ++c) od_index[communities[c]] = c;

    std::vector<std::vector<std::size_t>> serves(routes.size());
    for (std::size_t r = 0; r < routes.size(); ++r) {
      const Od od = od_of(routes[r]);
      if (auto it = od_index.find(od); it != od_index.end()) {
        serves[r] = {it->second};
        continue;
      }
      // Fallback: lowest-id community with the same origin, else the
      // community whose origin is nearest.
      std::size_t best = communities.size();
      double best_d = kInfinity;
      for (std::size_t c = 0; c < communities.size(); ++c) {
        const double d = dist(communities[c].first, od.first);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      serves[r] = {best};
    }

    net.routes = std::move(routes);
    net.route_communities = std::move(serves);
    net.community_count = spec.community_count;
    if (detail::preflight_feasible(net, scenarios, 1e-3)) {
      if (auto v = validate_network(net); !v.empty()) throw Error("generated network invalid: " + v.front().message);
      return {std::move(net), std::move(scenarios), spec};
    }
  }
  throw InputError("case generation: no route sample admitted a feasible routing after 20 attempts");
}

}  // namespace uamfair
