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

#include <gtest/gtest.h>

#include <random>

#include "uamfair/network.hpp"

namespace uamfair {
namespace {

Network two_node_cycle() {
  Network net;
  net.node_count = 2;
  net.links = {{0, 1}, {1, 0}};
  net.routes = {{0}, {0, 1}};
  net.community_count = 1;
  net.route_communities = {{0}, {0}};
  return net;
}

TEST(BuildIncidence, SingleLinkColumns) {
  Network net;
  net.node_count = 2;
  net.links = {{0, 1}};
  net.routes = {{0}};
  net.community_count = 1;
  net.route_communities = {{0}};
  const auto m = build_incidence(net);
  EXPECT_EQ(m.E(0, 0), -1.0);
  EXPECT_EQ(m.E(1, 0), 1.0);
  EXPECT_EQ(m.K(0, 0), 0.0);
  EXPECT_EQ(m.K(1, 0), 1.0);
}

TEST(BuildIncidence, RouteColumnOfF) {
  // Six links; the route uses links 3 (3->4) and 5 (4->5), 1-based.
  Network net;
  net.node_count = 5;
  net.links = {{0, 1}, {1, 0}, {2, 3}, {3, 2}, {3, 4}, {4, 3}};
  net.routes = {{2, 4}};
  net.community_count = 1;
  net.route_communities = {{0}};
  ASSERT_TRUE(validate_network(net).empty());
  const auto m = build_incidence(net);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(m.F(i, 0), (i == 2 || i == 4) ? 1.0 : 0.0) << "row " << i;
  }
}

TEST(BuildIncidence, CommunityColumnOfH) {
  Network net = two_node_cycle();
  net.community_count = 3;
  net.route_communities = {{1}, {0, 2}};
  const auto m = build_incidence(net);
  EXPECT_EQ(m.H(0, 0), 0.0);
  EXPECT_EQ(m.H(1, 0), 1.0);
  EXPECT_EQ(m.H(2, 0), 0.0);
  EXPECT_EQ(m.H(0, 1), 1.0);
  EXPECT_EQ(m.H(2, 1), 1.0);
}

TEST(BuildIncidence, ColumnSumsAndDeterminism) {
  std::mt19937_64 rng(3);
  Network net;
  net.node_count = 6;
  std::uniform_int_distribution<std::size_t> node(0, 5);
  while (net.links.size() < 15) {
    const std::size_t a = node(rng), b = node(rng);
    if (a != b) net.links.push_back({a, b});
  }
  net.routes = {{0}};
  net.community_count = 1;
  net.route_communities = {{0}};
  const auto m = build_incidence(net);
  for (std::size_t j = 0; j < net.link_count(); ++j) {
    double se = 0.0, sk = 0.0;
    int plus = 0, minus = 0;
    for (std::size_t i = 0; i < net.node_count; ++i) {
      se += m.E(i, j);
      sk += m.K(i, j);
      plus += m.E(i, j) == 1.0;
      minus += m.E(i, j) == -1.0;
      EXPECT_EQ(m.K(i, j), std::max(m.E(i, j), 0.0));
    }
    EXPECT_EQ(se, 0.0);
    EXPECT_EQ(sk, 1.0);
    EXPECT_EQ(plus, 1);
    EXPECT_EQ(minus, 1);
  }
  const auto again = build_incidence(net);
  EXPECT_EQ(m.E, again.E);
  EXPECT_EQ(m.F, again.F);
  EXPECT_EQ(m.H, again.H);
  EXPECT_EQ(m.K, again.K);

  // 1'Ky = 1'y for any y.
  std::uniform_real_distribution<double> u(0.0, 5.0);
  Vec y(net.link_count());
  for (double& v : y) v = u(rng);
  EXPECT_NEAR(sum(multiply(m.K, y)), sum(y), 1e-12);
}

TEST(ValidateNetwork, WellFormed) { EXPECT_TRUE(validate_network(two_node_cycle()).empty()); }

TEST(ValidateNetwork, RouteNotHeadToTail) {
  Network net;
  net.node_count = 4;
  net.links = {{0, 1}, {2, 3}};
  net.routes = {{0, 1}};
  net.community_count = 1;
  net.route_communities = {{0}};
  const auto v = validate_network(net);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].message.find("route not head-to-tail at position 2"), std::string::npos);
  EXPECT_NE(v[0].message.find("route 1"), std::string::npos);
}

TEST(ValidateNetwork, SelfLoop) {
  Network net = two_node_cycle();
  net.node_count = 4;
  net.links.push_back({3, 3});
  const auto v = validate_network(net);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].message.find("self-loop link"), std::string::npos);
  EXPECT_NE(v[0].message.find("link 3"), std::string::npos);
}

TEST(ValidateNetwork, CoverageAndRanges) {
  Network net = two_node_cycle();
  net.community_count = 2;  // community 2 unserved
  net.routes.push_back({7});
  net.route_communities.push_back({});
  const auto v = validate_network(net);
  std::string all;
  for (const auto& x : v) all += x.message + "\n";
  EXPECT_NE(all.find("community 2: not served"), std::string::npos) << all;
  EXPECT_NE(all.find("route 3: link id 8 out of range"), std::string::npos) << all;
  EXPECT_NE(all.find("route 3: serves no community"), std::string::npos) << all;
  EXPECT_THROW(build_incidence(net), InputError);
}

TEST(ResidualBalance, Examples) {
  Network net = two_node_cycle();
  const auto m = build_incidence(net);
  EXPECT_EQ(residual_balance(m.E, Vec{3.0, 3.0}), (Vec{0.0, 0.0}));
  EXPECT_EQ(residual_balance(m.E, Vec{0.0, 0.0}), (Vec{0.0, 0.0}));

  Network path;
  path.node_count = 2;
  path.links = {{0, 1}};
  path.routes = {{0}};
  path.community_count = 1;
  path.route_communities = {{0}};
  const auto mp = build_incidence(path);
  EXPECT_EQ(residual_balance(mp.E, Vec{3.0}), (Vec{-3.0, 3.0}));
  EXPECT_THROW(residual_balance(mp.E, Vec{1.0, 2.0}), DimensionError);
}

}  // namespace
}  // namespace uamfair
