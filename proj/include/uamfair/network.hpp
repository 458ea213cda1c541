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

// Transport graph model: vertiports (nodes), flight corridors (directed
// links), routes (head-to-tail link sequences) and the communities each
// route serves. All ids are 0-based here; files use 1-based ids and the
// conversion happens in io.hpp.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uamfair/errors.hpp"
#include "uamfair/linalg.hpp"

namespace uamfair {

struct Link {
  std::size_t tail = 0;
  std::size_t head = 0;
  bool operator==(const Link&) const = default;
};

struct Network {
  std::size_t node_count = 0;
  std::vector<Link> links;
  std::vector<std::vector<std::size_t>> routes;  // link ids, in travel order
  std::size_t community_count = 0;
  std::vector<std::vector<std::size_t>> route_communities;  // aligned with routes
  std::vector<std::array<double, 2>> coordinates;           // optional, export only

  std::size_t link_count() const { return links.size(); }
  std::size_t route_count() const { return routes.size(); }

  bool operator==(const Network&) const = default;
};

// Node-link (E), link-route (F), community-route (H) and head-weighting (K)
// matrices.
struct IncidenceMatrices {
  Matrix E;  // node x link: +1 at head, -1 at tail
  Matrix F;  // link x route: 1 if the route uses the link
  Matrix H;  // community x route: 1 if the route serves the community
  Matrix K;  // node x link: max(E, 0)
};

struct Violation {
  std::string message;
};

// Checks every structural invariant of a network and reports each offence
// with the (1-based) id of the offending element. An empty result means the
// network is well formed.
inline std::vector<Violation> validate_network(const Network& net) {
  std::vector<Violation> out;
  auto add = [&out](std::string m) { out.push_back({std::move(m)}); };
  auto id = [](std::size_t i) { return std::to_string(i + 1); };

  if (net.node_count == 0) add("network has no nodes");
  if (net.links.empty()) add("network has no links");
  if (net.routes.empty()) add("network has no routes");
  if (net.community_count == 0) add("network has no communities");
  if (!net.coordinates.empty() && net.coordinates.size() != net.node_count) {
    add("coordinates given for " + std::to_string(net.coordinates.size()) + " of " +
        std::to_string(net.node_count) + " nodes");
  }

  for (std::size_t j = 0; j < net.links.size(); ++j) {
    const Link& l = net.links[j];
    if (l.tail >= net.node_count || l.head >= net.node_count) {
      add("link " + id(j) + ": node id out of range");
    } else if (l.tail == l.head) {
      add("link " + id(j) + ": self-loop link");
    }
  }

  if (net.route_communities.size() != net.routes.size()) {
    add("route_communities has " + std::to_string(net.route_communities.size()) +
        " entries for " + std::to_string(net.routes.size()) + " routes");
  }

  std::vector<bool> community_served(net.community_count, false);
  for (std::size_t r = 0; r < net.routes.size(); ++r) {
    const auto& route = net.routes[r];
    if (route.empty()) {
      add("route " + id(r) + ": empty route");
      continue;
    }
    bool ids_ok = true;
    for (std::size_t link : route) {
      if (link >= net.links.size()) {
        add("route " + id(r) + ": link id " + id(link) + " out of range");
        ids_ok = false;
      }
    }
    if (ids_ok) {
      for (std::size_t pos = 1; pos < route.size(); ++pos) {
        if (net.links[route[pos - 1]].head != net.links[route[pos]].tail) {
          add("route " + id(r) + ": route not head-to-tail at position " + std::to_string(pos + 1));
        }
      }
    }
    if (r < net.route_communities.size()) {
      const auto& served = net.route_communities[r];
      if (served.empty()) add("route " + id(r) + ": serves no community");
      for (std::size_t k : served) {
        if (k >= net.community_count) {
          add("route " + id(r) + ": community id " + id(k) + " out of range");
        } else {
          community_served[k] = true;
        }
      }
    }
  }
  for (std::size_t k = 0; k < net.community_count; ++k) {
    if (!community_served[k]) add("community " + id(k) + ": not served by any route");
  }
  return out;
}

inline IncidenceMatrices build_incidence(const Network& net) {
  if (auto v = validate_network(net); !v.empty()) {
    throw InputError("build_incidence: invalid network: " + v.front().message);
  }
  const std::size_t nn = net.node_count;
  const std::size_t nl = net.link_count();
  const std::size_t nr = net.route_count();
  const std::size_t nc = net.community_count;

  IncidenceMatrices m{Matrix(nn, nl), Matrix(nl, nr), Matrix(nc, nr), Matrix(nn, nl)};
  for (std::size_t j = 0; j < nl; ++j) {
    m.E(net.links[j].head, j) = 1.0;
    m.E(net.links[j].tail, j) = -1.0;
    m.K(net.links[j].head, j) = 1.0;
  }
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t link : net.routes[r]) m.F(link, r) = 1.0;
    for (std::size_t k : net.route_communities[r]) m.H(k, r) = 1.0;
  }
  return m;
}

// Net vehicle accumulation per node, E*y. Zero for a balanced flow.
inline Vec residual_balance(const Matrix& E, std::span<const double> y) {
  return multiply(E, y);
}

}  // namespace uamfair
