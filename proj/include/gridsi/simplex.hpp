#pragma once

#include "gridsi/types.hpp"

namespace gridsi::lp {

// min c'x  s.t.  A x <= b,  lb <= x <= ub.
// Lower bounds must be finite; upper bounds may be +inf.
struct Problem {
  Vec c;
  Mat A;
  Vec b;
  Vec lb;
  Vec ub;

  int n() const { return static_cast<int>(c.size()); }
  int m() const { return static_cast<int>(b.size()); }
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit };

struct Solution {
  Status status = Status::IterationLimit;
  Vec x;
  double objective = 0.0;
  Vec dual_row;      // y >= 0, one per row of A (and per finite upper bound)
  Vec reduced_cost;  // r = c + A_std' y >= 0 on the shifted variables
};

// Dense two-phase simplex with Bland's smallest-index rule, so ties resolve
// deterministically and cycling cannot occur.
Solution solve(const Problem& prob, int max_iters = 0);

// Independent KKT check of an Optimal solution: primal feasibility, dual
// feasibility, complementary slackness and a closed duality gap.
bool check_certificate(const Problem& prob, const Solution& sol, double tol = 1e-7);

}  // namespace gridsi::lp
