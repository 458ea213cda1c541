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

// Dense-data linear programming.
//
//   minimize / maximize  c'v
//   subject to           A v <= b,   G v = g,   lower <= v <= upper
//
// solved by a bounded-variable revised simplex method. Every row gets a
// logical (slack) variable, bounded [0, inf) for inequalities and [0, 0] for
// equalities, so the all-logical basis is always available as a start.
// Phase 1 minimizes the sum of bound infeasibilities of the basic variables
// from whatever basis is current, which lets a solver object be re-solved
// after the objective changes or rows are appended (warm start).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "uamfair/errors.hpp"
#include "uamfair/linalg.hpp"

namespace uamfair::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Minimize, Maximize };

enum class Status { Optimal, Infeasible, Unbounded };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
  }
  return "?";
}

struct LinearProgram {
  Vec objective;
  Sense sense = Sense::Minimize;
  Matrix A;  // inequality rows, A v <= b
  Vec b;
  Matrix G;  // equality rows, G v = g
  Vec g;
  Vec lower;  // empty means 0 for every variable
  Vec upper;  // empty means +inf for every variable

  std::size_t variable_count() const { return objective.size(); }
  double lower_bound(std::size_t j) const { return lower.empty() ? 0.0 : lower[j]; }
  double upper_bound(std::size_t j) const { return upper.empty() ? kInf : upper[j]; }
};

struct LpResult {
  Status status = Status::Infeasible;
  double objective = 0.0;
  Vec x;
  std::size_t iterations = 0;
};

struct SimplexOptions {
  double pivot_tol = 1e-9;
  double feasibility_tol = 1e-8;
  double optimality_tol = 1e-9;
  // Consecutive degenerate pivots before switching to Bland's rule.
  std::size_t degenerate_limit = 20;
  // 0 selects the default cap of 50 * (rows + cols) per solve() call.
  std::size_t max_iterations = 0;
  std::size_t refactor_interval = 100;
  bool scale = true;
};

// Throws DimensionError if the pieces of `lp` do not fit together.
inline void check_dimensions(const LinearProgram& lp) {
  const std::size_t n = lp.variable_count();
  auto fail = [](const std::string& what) { throw DimensionError("linear program: " + what); };
  if (lp.A.rows() > 0 && lp.A.cols() != n) fail("A has wrong column count");
  if (lp.G.rows() > 0 && lp.G.cols() != n) fail("G has wrong column count");
  if (lp.b.size() != lp.A.rows()) fail("b length differs from rows of A");
  if (lp.g.size() != lp.G.rows()) fail("g length differs from rows of G");
  if (!lp.lower.empty() && lp.lower.size() != n) fail("lower bound length");
  if (!lp.upper.empty() && lp.upper.size() != n) fail("upper bound length");
  for (double v : lp.objective) {
    if (!std::isfinite(v)) fail("non-finite objective coefficient");
  }
  for (double v : lp.A.data()) {
    if (!std::isfinite(v)) fail("non-finite entry in A");
  }
  for (double v : lp.G.data()) {
    if (!std::isfinite(v)) fail("non-finite entry in G");
  }
}

class SimplexSolver {
 public:
  explicit SimplexSolver(const LinearProgram& lp, SimplexOptions options = {})
      : opt_(options), n_(lp.variable_count()), sense_(lp.sense) {
    check_dimensions(lp);
    const std::size_t m = lp.A.rows() + lp.G.rows();
    cols_.assign(n_, {});
    row_scale_.assign(m, 1.0);
    col_scale_.assign(n_, 1.0);

    auto row_of = [&](std::size_t i) {
      return i < lp.A.rows() ? lp.A.row(i) : lp.G.row(i - lp.A.rows());
    };
    if (opt_.scale) {
      for (std::size_t i = 0; i < m; ++i) row_scale_[i] = pow2_reciprocal(norm_inf(row_of(i)));
      for (std::size_t j = 0; j < n_; ++j) {
        double mx = 0.0;
        for (std::size_t i = 0; i < m; ++i) mx = std::max(mx, std::abs(row_of(i)[j] * row_scale_[i]));
        col_scale_[j] = pow2_reciprocal(mx);
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = row_of(i);
      for (std::size_t j = 0; j < n_; ++j) {
        if (r[j] != 0.0) cols_[j].emplace_back(i, r[j] * row_scale_[i] * col_scale_[j]);
      }
    }
    m_ = m;

    lo_.resize(n_ + m_);
    up_.resize(n_ + m_);
    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = lp.lower_bound(j) / col_scale_[j];
      up_[j] = lp.upper_bound(j) / col_scale_[j];
      if (lo_[j] > up_[j]) {
        throw DimensionError("linear program: lower bound exceeds upper bound for variable " +
                             std::to_string(j));
      }
    }
    rhs_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const bool eq = i >= lp.A.rows();
      lo_[n_ + i] = 0.0;
      up_[n_ + i] = eq ? 0.0 : kInf;
      rhs_[i] = (eq ? lp.g[i - lp.A.rows()] : lp.b[i]) * row_scale_[i];
    }
    set_objective(lp.objective, lp.sense);

    x_.assign(n_ + m_, 0.0);
    basic_pos_.assign(n_ + m_, kNonbasic);
    for (std::size_t j = 0; j < n_; ++j) x_[j] = initial_value(j);
    basis_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      basis_[i] = n_ + i;
      basic_pos_[n_ + i] = i;
    }
    refactor();
  }

  std::size_t variable_count() const { return n_; }
  std::size_t row_count() const { return m_; }

  void set_objective(std::span<const double> c, Sense sense) {
    if (c.size() != n_) throw DimensionError("set_objective: wrong length");
    sense_ = sense;
    const double sign = sense == Sense::Maximize ? -1.0 : 1.0;
    cost_.assign(n_ + m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) cost_[j] = sign * c[j] * col_scale_[j];
  }

  // Appends the row a'v <= rhs. The current basis is kept; the new logical
  // enters it and phase 1 repairs any violation on the next solve().
  void add_inequality(std::span<const double> a, double rhs) {
    if (a.size() != n_) throw DimensionError("add_inequality: wrong length");
    double mx = 0.0;
    for (std::size_t j = 0; j < n_; ++j) mx = std::max(mx, std::abs(a[j] * col_scale_[j]));
    const double rs = opt_.scale ? pow2_reciprocal(mx) : 1.0;
    const std::size_t i = m_;
    for (std::size_t j = 0; j < n_; ++j) {
      if (a[j] != 0.0) cols_[j].emplace_back(i, a[j] * col_scale_[j] * rs);
    }
    row_scale_.push_back(rs);
    rhs_.push_back(rhs * rs);
    lo_.push_back(0.0);
    up_.push_back(kInf);
    cost_.push_back(0.0);
    x_.push_back(0.0);
    basic_pos_.push_back(m_);
    basis_.push_back(n_ + m_);
    ++m_;
    refactor();
  }

  LpResult solve() {
    const std::size_t cap =
        opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (m_ + n_) + 100;
    std::size_t iterations = 0;
    std::size_t degenerate_run = 0;
    Vec cb(m_), pi(m_), alpha(m_);

    for (;;) {
      if (iterations >= cap) {
        throw SolverError("simplex stalled: iteration cap " + std::to_string(cap) + " reached");
      }
      if (since_refactor_ >= opt_.refactor_interval) refactor();

      // Phase 1 costs on infeasible basics, otherwise the true costs.
      bool phase1 = false;
      for (std::size_t r = 0; r < m_; ++r) {
        const std::size_t v = basis_[r];
        if (x_[v] < lo_[v] - opt_.feasibility_tol) {
          cb[r] = -1.0;
          phase1 = true;
        } else if (x_[v] > up_[v] + opt_.feasibility_tol) {
          cb[r] = 1.0;
          phase1 = true;
        } else {
          cb[r] = 0.0;
        }
      }
      if (!phase1) {
        for (std::size_t r = 0; r < m_; ++r) cb[r] = cost_[basis_[r]];
      }
      for (std::size_t i = 0; i < m_; ++i) pi[i] = dot_column(cb, i);

      const bool bland = degenerate_run >= opt_.degenerate_limit;
      std::size_t enter = kNonbasic;
      double enter_dir = 0.0;
      double best = 0.0;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (basic_pos_[j] != kNonbasic || lo_[j] == up_[j]) continue;
        const double d = (phase1 ? 0.0 : cost_[j]) - column_dot(j, pi);
        double dir = 0.0;
        if (d < -opt_.optimality_tol && x_[j] < up_[j]) dir = 1.0;
        if (d > opt_.optimality_tol && x_[j] > lo_[j]) dir = -1.0;
        if (dir == 0.0) continue;
        if (bland) {
          enter = j;
          enter_dir = dir;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          enter_dir = dir;
        }
      }

      if (enter == kNonbasic) {
        if (phase1) return finish(Status::Infeasible, iterations);
        return finish(Status::Optimal, iterations);
      }

      ftran(enter, alpha);

      // Harris-style two pass ratio test. Basic x_B[r] moves at rate
      // -dir * alpha[r] per unit step of the entering variable; `target`
      // receives the bound it runs into.
      auto limit_for = [&](std::size_t r, double slack, double* target) -> double {
        if (std::abs(alpha[r]) <= opt_.pivot_tol) return kInf;
        const double rate = -enter_dir * alpha[r];
        const std::size_t v = basis_[r];
        double bound = 0.0;
        if (rate > 0.0) {
          if (x_[v] > up_[v] + opt_.feasibility_tol) return kInf;  // already above, moving away
          if (x_[v] < lo_[v] - opt_.feasibility_tol) {
            bound = lo_[v];
          } else if (up_[v] < kInf) {
            bound = up_[v];
          } else {
            return kInf;
          }
          if (target) *target = bound;
          return (bound - x_[v] + slack) / rate;
        }
        if (x_[v] < lo_[v] - opt_.feasibility_tol) return kInf;
        if (x_[v] > up_[v] + opt_.feasibility_tol) {
          bound = up_[v];
        } else if (lo_[v] > -kInf) {
          bound = lo_[v];
        } else {
          return kInf;
        }
        if (target) *target = bound;
        return (x_[v] - bound + slack) / -rate;
      };
      double relaxed = kInf;
      for (std::size_t r = 0; r < m_; ++r) {
        relaxed = std::min(relaxed, limit_for(r, opt_.feasibility_tol, nullptr));
      }
      std::size_t leave = kNonbasic;
      double step = kInf;
      double leave_bound = 0.0;
      double best_pivot = 0.0;
      for (std::size_t r = 0; r < m_; ++r) {
        double bound = 0.0;
        const double t = limit_for(r, 0.0, &bound);
        if (t == kInf || t > relaxed) continue;
        bool take = false;
        if (bland) {
          take = leave == kNonbasic || t < step - 1e-12 ||
                 (t <= step + 1e-12 && basis_[r] < basis_[leave]);
        } else {
          take = std::abs(alpha[r]) > best_pivot;
        }
        if (take) {
          best_pivot = std::abs(alpha[r]);
          leave = r;
          step = t;
          leave_bound = bound;
        }
      }
      step = std::max(step, 0.0);
      const double range = up_[enter] - lo_[enter];

      if (leave == kNonbasic && range == kInf) {
        if (phase1) throw SolverError("simplex: unbounded phase 1 direction");
        return finish(Status::Unbounded, iterations);
      }
      ++iterations;

      if (range <= step) {
        // Bound flip, basis unchanged.
        for (std::size_t r = 0; r < m_; ++r) x_[basis_[r]] -= enter_dir * alpha[r] * range;
        x_[enter] = enter_dir > 0 ? up_[enter] : lo_[enter];
        degenerate_run = 0;
        continue;
      }

      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;
      for (std::size_t r = 0; r < m_; ++r) x_[basis_[r]] -= enter_dir * alpha[r] * step;
      x_[enter] += enter_dir * step;
      x_[basis_[leave]] = leave_bound;
      pivot(leave, enter, alpha);
    }
  }

 private:
  static constexpr std::size_t kNonbasic = std::numeric_limits<std::size_t>::max();

  static double pow2_reciprocal(double v) {
    if (v <= 0.0 || !std::isfinite(v)) return 1.0;
    return std::ldexp(1.0, -static_cast<int>(std::lround(std::log2(v))));
  }

  double initial_value(std::size_t j) const {
    if (lo_[j] > -kInf) return lo_[j];
    if (up_[j] < kInf) return up_[j];
    return 0.0;
  }

  // pi_i = cb' * (column i of B^-1); binv_ is stored column-major.
  double dot_column(const Vec& cb, std::size_t i) const {
    const double* col = binv_.data() + i * m_;
    double s = 0.0;
    for (std::size_t r = 0; r < m_; ++r) s += cb[r] * col[r];
    return s;
  }

  double column_dot(std::size_t j, const Vec& v) const {
    if (j >= n_) return v[j - n_];
    double s = 0.0;
    for (const auto& [i, a] : cols_[j]) s += a * v[i];
    return s;
  }

  // alpha = B^-1 a_j
  void ftran(std::size_t j, Vec& alpha) const {
    std::fill(alpha.begin(), alpha.end(), 0.0);
    auto axpy = [&](std::size_t i, double a) {
      const double* col = binv_.data() + i * m_;
      for (std::size_t r = 0; r < m_; ++r) alpha[r] += a * col[r];
    };
    if (j >= n_) {
      axpy(j - n_, 1.0);
    } else {
      for (const auto& [i, a] : cols_[j]) axpy(i, a);
    }
  }

  void pivot(std::size_t leave, std::size_t enter, const Vec& alpha) {
    const double piv = alpha[leave];
    for (std::size_t c = 0; c < m_; ++c) {
      double* col = binv_.data() + c * m_;
      const double v = col[leave] / piv;
      if (v == 0.0) continue;
      for (std::size_t r = 0; r < m_; ++r) col[r] -= alpha[r] * v;
      col[leave] = v;
    }
    basic_pos_[basis_[leave]] = kNonbasic;
    basis_[leave] = enter;
    basic_pos_[enter] = leave;
    ++since_refactor_;
  }

  // Recomputes B^-1 from scratch (Gauss-Jordan, partial pivoting) and the
  // basic values from the nonbasic ones.
  void refactor() {
    const std::size_t m = m_;
    Vec work(m * m, 0.0);  // row-major B
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t v = basis_[k];
      if (v >= n_) {
        work[(v - n_) * m + k] = 1.0;
      } else {
        for (const auto& [i, a] : cols_[v]) work[i * m + k] = a;
      }
    }
    Vec inv(m * m, 0.0);  // row-major
    for (std::size_t i = 0; i < m; ++i) inv[i * m + i] = 1.0;
    for (std::size_t c = 0; c < m; ++c) {
      std::size_t p = c;
      for (std::size_t r = c + 1; r < m; ++r) {
        if (std::abs(work[r * m + c]) > std::abs(work[p * m + c])) p = r;
      }
      if (std::abs(work[p * m + c]) < 1e-13) throw SolverError("simplex: singular basis");
      if (p != c) {
        for (std::size_t k = 0; k < m; ++k) {
          std::swap(work[p * m + k], work[c * m + k]);
          std::swap(inv[p * m + k], inv[c * m + k]);
        }
      }
      const double d = work[c * m + c];
      for (std::size_t k = 0; k < m; ++k) {
        work[c * m + k] /= d;
        inv[c * m + k] /= d;
      }
      for (std::size_t r = 0; r < m; ++r) {
        if (r == c) continue;
        const double f = work[r * m + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m; ++k) {
          work[r * m + k] -= f * work[c * m + k];
          inv[r * m + k] -= f * inv[c * m + k];
        }
      }
    }
    binv_.assign(m * m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) binv_[c * m + r] = inv[r * m + c];
    }
    since_refactor_ = 0;

    Vec resid = rhs_;
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (basic_pos_[j] != kNonbasic || x_[j] == 0.0) continue;
      if (j >= n_) {
        resid[j - n_] -= x_[j];
      } else {
        for (const auto& [i, a] : cols_[j]) resid[i] -= a * x_[j];
      }
    }
    for (std::size_t r = 0; r < m; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += binv_[i * m + r] * resid[i];
      x_[basis_[r]] = s;
    }
  }

  LpResult finish(Status status, std::size_t iterations) {
    LpResult res;
    res.status = status;
    res.iterations = iterations;
    if (status != Status::Optimal) return res;
    refactor();
    res.x.resize(n_);
    double obj = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      double v = std::clamp(x_[j], lo_[j], up_[j]);
      res.x[j] = v * col_scale_[j];
      obj += cost_[j] * v;
    }
    res.objective = sense_ == Sense::Maximize ? -obj : obj;
    return res;
  }

  SimplexOptions opt_;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  Sense sense_ = Sense::Minimize;
  std::vector<std::vector<std::pair<std::size_t, double>>> cols_;
  Vec row_scale_, col_scale_;
  Vec cost_, lo_, up_, rhs_;
  Vec x_;
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> basic_pos_;
  Vec binv_;
  std::size_t since_refactor_ = 0;
};

inline LpResult lp_solve(const LinearProgram& lp, SimplexOptions options = {}) {
  SimplexSolver solver(lp, options);
  return solver.solve();
}

struct LpCheck {
  double max_equality_residual = 0.0;
  double max_inequality_violation = 0.0;
  double max_bound_violation = 0.0;
  double objective = 0.0;
};

inline LpCheck lp_check(const LinearProgram& lp, std::span<const double> v) {
  check_dimensions(lp);
  if (v.size() != lp.variable_count()) throw DimensionError("lp_check: candidate length");
  LpCheck out;
  if (lp.variable_count() == 0) return out;
  out.objective = dot(lp.objective, v);
  if (lp.A.rows() > 0) {
    const Vec av = multiply(lp.A, v);
    for (std::size_t i = 0; i < av.size(); ++i) {
      out.max_inequality_violation = std::max(out.max_inequality_violation, av[i] - lp.b[i]);
    }
  }
  if (lp.G.rows() > 0) {
    const Vec gv = multiply(lp.G, v);
    for (std::size_t i = 0; i < gv.size(); ++i) {
      out.max_equality_residual = std::max(out.max_equality_residual, std::abs(gv[i] - lp.g[i]));
    }
  }
  for (std::size_t j = 0; j < v.size(); ++j) {
    out.max_bound_violation = std::max({out.max_bound_violation, lp.lower_bound(j) - v[j],
                                        v[j] - lp.upper_bound(j)});
  }
  return out;
}

// Plain-text dump of an LP instance, for reproducing solver failures.
inline std::string dump(const LinearProgram& lp) {
  std::ostringstream os;
  os.precision(17);
  os << (lp.sense == Sense::Maximize ? "maximize" : "minimize") << ' ' << lp.variable_count() << '\n';
  os << "c";
  for (double v : lp.objective) os << ' ' << v;
  os << '\n';
  for (std::size_t i = 0; i < lp.A.rows(); ++i) {
    os << "le";
    for (double v : lp.A.row(i)) os << ' ' << v;
    os << " | " << lp.b[i] << '\n';
  }
  for (std::size_t i = 0; i < lp.G.rows(); ++i) {
    os << "eq";
    for (double v : lp.G.row(i)) os << ' ' << v;
    os << " | " << lp.g[i] << '\n';
  }
  os << "bounds";
  for (std::size_t j = 0; j < lp.variable_count(); ++j) {
    os << " [" << lp.lower_bound(j) << ',' << lp.upper_bound(j) << ']';
  }
  os << '\n';
  return os.str();
}

}  // namespace uamfair::lp
