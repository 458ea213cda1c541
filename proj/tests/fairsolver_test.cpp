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

#include "uamfair/fairsolver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "instances.hpp"
#include "oracles.hpp"

namespace uamfair {
namespace {

using testing::random_problem;
using testing::shared_bottleneck_problem;
using testing::symmetric_problem;
using testing::tiny_problem;

constexpr RiskKind kKinds[] = {RiskKind::CVaR, RiskKind::EVaR, RiskKind::TV};

void expect_valid(const FairProblem& prob, const FlowSolution& sol, const SolveReport& rep) {
  EXPECT_TRUE(solution_violations(rep.residuals).empty())
      << "balance " << rep.residuals.balance << " scen " << rep.residuals.scenario_capacity << " cert "
      << rep.residuals.certificate_value << " dom " << rep.residuals.certificate_domain;
  for (double v : sol.x) EXPECT_GE(v, prob.x_min - 1e-9);
  EXPECT_LE(rep.rho, prob.risk.epsilon + 1e-6);
  for (std::size_t t = 1; t < rep.best_gap_trace.size(); ++t) {
    EXPECT_LE(rep.best_gap_trace[t], rep.best_gap_trace[t - 1]);
  }
}

TEST(AlphaUtility, Examples) {
  EXPECT_DOUBLE_EQ(alpha_utility(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(alpha_utility_grad(1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(alpha_utility(7.0, 0.0), 7.0);
  EXPECT_DOUBLE_EQ(alpha_utility_grad(7.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(alpha_utility(2.0, 2.0), -0.5);
  EXPECT_DOUBLE_EQ(alpha_utility_grad(2.0, 2.0), 0.25);
  EXPECT_THROW(alpha_utility(0.0, 1.0), DomainError);
  EXPECT_THROW(alpha_utility_grad(-1.0, 2.0), DomainError);
}

TEST(AlphaUtility, GradientMatchesCentralDifference) {
  for (double alpha : {0.0, 0.5, 1.0, 2.0, 10.0}) {
    for (double x = 1e-3; x <= 1e3; x *= 1.7) {
      // Step 1e-5 relative to x keeps the truncation error below 1e-8 at x_min.
      const double fd = testing::central_difference([&](double t) { return alpha_utility(t, alpha); }, x,
                                                    1e-5 * x);
      const double g = alpha_utility_grad(x, alpha);
      EXPECT_NEAR(fd, g, 1e-6 * std::abs(g)) << "alpha " << alpha << " x " << x;
    }
  }
}

TEST(Reformulation, LinearForCvarAndTv) {
  for (RiskKind k : kKinds) {
    const auto ref = build_reformulation(symmetric_problem(k));
    EXPECT_EQ(ref.has_conic, k == RiskKind::EVaR);
    const auto& L = ref.layout;
    EXPECT_EQ(L.total, 2 + 4 + 2 + 2 + 1 + 1 + 2 + (k == RiskKind::CVaR ? 2 : 0));
    EXPECT_EQ(ref.lp.G.rows(), 4u + 2u);
    EXPECT_EQ(ref.lp.lower[L.lambda], k == RiskKind::EVaR ? 1e-9 : 0.0);
  }
}

TEST(Reformulation, ZeroCapacityBecomesHardBound) {
  auto p = symmetric_problem();
  p.scenarios.link_caps[1][2] = 0.0;
  const auto ref = build_reformulation(p);
  ASSERT_EQ(ref.blocked_links, std::vector<std::size_t>{2});
  EXPECT_EQ(ref.lp.upper[ref.layout.y + 2], 0.0);
}

TEST(Reformulation, FeasiblePointsSatisfyRiskConstraint) {
  // Any point of the CVaR/TV polytope certifies rho(h*(y)) <= epsilon.
  for (RiskKind k : {RiskKind::CVaR, RiskKind::TV}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto prob = random_problem(seed, k);
      const auto ref = build_reformulation(prob);
      lp::LinearProgram lp = ref.lp;
      std::mt19937_64 rng(seed);
      for (std::size_t c = 0; c < ref.layout.communities; ++c) lp.objective[ref.layout.x + c] = 1.0 + (rng() % 3);
      const auto res = lp::lp_solve(lp);
      ASSERT_EQ(res.status, lp::Status::Optimal);
      const Vec y(res.x.begin() + ref.layout.y, res.x.begin() + ref.layout.y + ref.layout.links);
      const auto ev = risk_of_flow(ref.incidence.K, y, prob.scenarios, k, prob.risk.delta);
      EXPECT_LE(ev.rho, prob.risk.epsilon + 1e-7);
      // And the risk constraint binds: a little more flow would break it.
      Vec y2 = y;
      for (double& v : y2) v *= 1.001;
      EXPECT_GT(risk_of_flow(ref.incidence.K, y2, prob.scenarios, k, prob.risk.delta).rho, prob.risk.epsilon);
    }
  }
}

TEST(SolveFair, TinyInstanceSaturatesCapacity) {
  for (RiskKind k : kKinds) {
    auto p = tiny_problem(k, 0.0);
    const auto [sol, rep] = solve_fair(p);
    ASSERT_EQ(sol.x.size(), 1u);
    EXPECT_NEAR(sol.x[0], 10.0, 1e-6) << to_string(k);
    EXPECT_NEAR(sol.y[0], 10.0, 1e-6);
    EXPECT_NEAR(sol.z[0], 10.0, 1e-6);
    expect_valid(p, sol, rep);
  }
}

TEST(SolveFair, SymmetricCorridorsGetEqualShares) {
  for (RiskKind k : kKinds) {
    auto p = symmetric_problem(k);
    const auto [sol, rep] = solve_fair(p);
    EXPECT_NEAR(sol.x[0], sol.x[1], 1e-6 * sol.x[0]) << to_string(k);
    EXPECT_NEAR(rep.fairness.jain, 1.0, 1e-9);
    expect_valid(p, sol, rep);
    const auto [msol, mrep] = solve_maxsum(p);
    EXPECT_NEAR(mrep.objective, sum(sol.x), 1e-6 * mrep.objective);
  }
}

TEST(SolveFair, SharedBottleneckClosedForm) {
  for (double alpha : {0.5, 1.0, 2.0, 5.0}) {
    for (StepRule rule : {StepRule::LineSearch, StepRule::FullyCorrective}) {
      auto p = shared_bottleneck_problem(alpha);
      p.config.step_rule = rule;
      p.config.gap_tol = 1e-10;
      p.config.max_iterations = 2000;
      const auto [sol, rep] = solve_fair(p);
      EXPECT_NEAR(sol.x[0], 7.0, 1e-4) << alpha << " " << to_string(rule);
      EXPECT_NEAR(sol.x[1], 7.0, 1e-4);
      expect_valid(p, sol, rep);
    }
  }
}

TEST(SolveFair, AlphaZeroMatchesMaxSum) {
  for (RiskKind k : kKinds) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      auto p = random_problem(seed, k, 0.0);
      const auto [sol, rep] = solve_fair(p);
      const auto [msol, mrep] = solve_maxsum(p);
      EXPECT_NEAR(rep.objective, mrep.objective, 1e-6) << to_string(k) << " seed " << seed;
      expect_valid(p, sol, rep);
      expect_valid(p, msol, mrep);
    }
  }
}

TEST(SolveFair, RandomInstancesAreFeasibleAndMonotone) {
  for (RiskKind k : kKinds) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      for (double alpha : {0.5, 1.0, 2.0}) {
        auto p = random_problem(seed, k, alpha);
        const auto [sol, rep] = solve_fair(p);
        expect_valid(p, sol, rep);
        // Exact line search never decreases the objective.
        for (std::size_t t = 1; t < rep.objective_trace.size(); ++t) {
          EXPECT_GE(rep.objective_trace[t], rep.objective_trace[t - 1] - 1e-10);
        }
        EXPECT_NEAR(rep.objective, total_utility(sol.x, alpha), 1e-9 * (1 + std::abs(rep.objective)));
        // The FW gap bounds the suboptimality, so the fully corrective run
        // (tighter) cannot beat it by more than the final gap.
        auto q = p;
        q.config.step_rule = StepRule::FullyCorrective;
        q.config.gap_tol = 1e-9;
        const auto [qsol, qrep] = solve_fair(q);
        expect_valid(q, qsol, qrep);
        EXPECT_LE(qrep.final_gap, 1e-9);
        EXPECT_LE(qrep.objective - rep.objective, rep.final_gap + 1e-9);
        EXPECT_LE(rep.objective - qrep.objective, qrep.final_gap + 1e-9);
      }
    }
  }
}

TEST(SolveFair, EpsilonMonotone) {
  for (RiskKind k : kKinds) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      double prev_fair = -kInfinity, prev_sum = -kInfinity;
      for (double eps : {0.0, 0.05, 0.2}) {
        auto p = random_problem(seed, k);
        p.risk.epsilon = eps;
        p.config.step_rule = StepRule::FullyCorrective;
        p.config.gap_tol = 1e-9;
        const auto [sol, rep] = solve_fair(p);
        const auto [msol, mrep] = solve_maxsum(p);
        EXPECT_GE(rep.objective, prev_fair - 1e-7 - rep.final_gap) << to_string(k) << " eps " << eps;
        EXPECT_GE(mrep.objective, prev_sum - 1e-7);
        prev_fair = rep.objective;
        prev_sum = mrep.objective;
      }
    }
  }
}

TEST(SolveMaxSum, DeltaMonotoneServedDemand) {
  for (RiskKind k : kKinds) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      double prev = kInfinity;
      for (double delta : {0.1, 0.5, 0.9}) {
        auto p = random_problem(seed, k);
        p.risk.delta = delta;
        const auto [sol, rep] = solve_maxsum(p);
        EXPECT_LE(rep.objective, prev + 1e-7) << to_string(k) << " delta " << delta;
        prev = rep.objective;
      }
    }
  }
}

TEST(SolveMaxSum, TinyAndZeroCapacity) {
  auto p = tiny_problem();
  EXPECT_NEAR(solve_maxsum(p).second.objective, 10.0, 1e-9);
  p.scenarios = testing::single_scenario({0, 0}, {0, 0});
  EXPECT_THROW(solve_maxsum(p), InfeasibleError);
  EXPECT_THROW(solve_fair(p), InfeasibleError);
}

TEST(SolveFair, InvalidInputsRejected) {
  auto p = tiny_problem();
  p.alpha = -1;
  EXPECT_THROW(solve_fair(p), DomainError);
  p = tiny_problem();
  p.x_min = 0;
  EXPECT_THROW(solve_fair(p), DomainError);
  p = tiny_problem();
  p.network.routes[0] = {5};
  EXPECT_THROW(solve_fair(p), InputError);
}

TEST(SolveFair, Deterministic) {
  auto p = random_problem(3, RiskKind::EVaR);
  const auto a = solve_fair(p);
  const auto b = solve_fair(p);
  EXPECT_EQ(a.first.x, b.first.x);
  EXPECT_EQ(a.first.y, b.first.y);
  EXPECT_EQ(a.second.gap_trace, b.second.gap_trace);
}

TEST(CheckAlphaFairness, SingleCommunity) {
  auto p = tiny_problem();
  const auto [sol, rep] = solve_fair(p);
  const auto chk = check_alpha_fairness(sol.x, p, 20);
  EXPECT_TRUE(chk.passed());
  EXPECT_LE(chk.worst, 1e-9);
}

TEST(CheckAlphaFairness, RandomNetworkAtTightGap) {
  for (RiskKind k : kKinds) {
    auto p = random_problem(11, k, 1.0);
    p.config.step_rule = StepRule::FullyCorrective;
    p.config.gap_tol = 1e-8;
    const auto [sol, rep] = solve_fair(p);
    ASSERT_LE(rep.final_gap, 1e-8);
    const auto chk = check_alpha_fairness(sol.x, p, 100, 5);
    EXPECT_TRUE(chk.passed()) << to_string(k) << " worst " << chk.worst;
  }
}

TEST(CheckAlphaFairness, DetectsSuboptimalAllocation) {
  auto p = shared_bottleneck_problem(1.0);
  const Vec skewed{10.0, 4.0};  // feasible but not fair
  const auto chk = check_alpha_fairness(skewed, p, 50, 3, 1e-6);
  EXPECT_FALSE(chk.passed());
  EXPECT_GT(chk.worst, 0.1);
}

}  // namespace
}  // namespace uamfair
