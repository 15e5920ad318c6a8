#include "gridsi/simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace gridsi::lp {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-9;

// The solver works on shifted variables z = x - lb >= 0 with finite upper
// bounds appended as extra rows, so both solve() and check_certificate() see
// the same standard form.
struct StandardForm {
  Mat A;  // rows: original constraints first, then upper-bound rows
  Vec b;
  Vec c;
};

StandardForm standardize(const Problem& prob) {
  const int n = prob.n();
  const int m = prob.m();
  if (n == 0) throw InputError("linear program has no variables");
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(prob.lb[j]))
      throw InputError("linear program requires finite lower bounds");
    if (prob.ub[j] < prob.lb[j])
      throw InputError("linear program has lb > ub at variable " + std::to_string(j));
  }

  int extra = 0;
  for (int j = 0; j < n; ++j)
    if (std::isfinite(prob.ub[j])) ++extra;

  StandardForm sf;
  sf.A = Mat::Zero(m + extra, n);
  sf.b = Vec::Zero(m + extra);
  sf.c = prob.c;
  sf.A.topRows(m) = prob.A;
  sf.b.head(m) = prob.b - prob.A * prob.lb;
  int r = m;
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(prob.ub[j])) continue;
    sf.A(r, j) = 1.0;
    sf.b(r) = prob.ub[j] - prob.lb[j];
    ++r;
  }
  return sf;
}

struct Tableau {
  // Columns: n structural, m slacks, then artificials, last column RHS.
  Mat t;
  std::vector<int> basis;       // per row: column index of the basic variable
  std::vector<double> row_sign;  // +-1: sign applied to make RHS nonnegative
  int n = 0, m = 0, n_art = 0;

  int cols() const { return n + m + n_art; }
};

// One simplex phase: pivots until the cost row has no negative reduced cost
// over the admissible columns. Returns false when the iteration budget runs
// out; sets *unbounded when an improving column has no positive pivot.
bool run_phase(Tableau& tb, Vec& cost_row, double& objective,
               const std::vector<bool>& allowed, int& iters_left, bool* unbounded) {
  const int m = tb.m;
  while (true) {
    int enter = -1;
    for (int j = 0; j < tb.cols(); ++j) {  // Bland: smallest index wins
      if (!allowed[j]) continue;
      if (cost_row[j] < -kCostTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return true;
    if (--iters_left < 0) return false;

    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const double a = tb.t(i, enter);
      if (a <= kPivotTol) continue;
      const double ratio = tb.t(i, tb.cols()) / a;
      if (ratio < best_ratio - 1e-12 ||
          (ratio < best_ratio + 1e-12 && (leave < 0 || tb.basis[i] < tb.basis[leave]))) {
        best_ratio = ratio;
        leave = i;
      }
    }
    if (leave < 0) {
      if (unbounded) *unbounded = true;
      return true;
    }

    const double piv = tb.t(leave, enter);
    tb.t.row(leave) /= piv;
    for (int i = 0; i < m; ++i) {
      if (i == leave) continue;
      const double f = tb.t(i, enter);
      if (f != 0.0) tb.t.row(i) -= f * tb.t.row(leave);
    }
    const double cf = cost_row[enter];
    if (cf != 0.0) {
      cost_row -= cf * tb.t.row(leave).head(tb.cols()).transpose();
      objective -= cf * tb.t(leave, tb.cols());
      cost_row[enter] = 0.0;  // cut pivot-column round-off
    }
    tb.basis[leave] = enter;
  }
}

}  // namespace

Solution solve(const Problem& prob, int max_iters) {
  const StandardForm sf = standardize(prob);
  const int n = static_cast<int>(sf.c.size());
  const int m = static_cast<int>(sf.b.size());
  if (max_iters <= 0) max_iters = 2000 + 200 * (m + n);

  Tableau tb;
  tb.n = n;
  tb.m = m;
  tb.n_art = 0;
  tb.row_sign.assign(m, 1.0);
  std::vector<int> art_of_row(m, -1);
  for (int i = 0; i < m; ++i)
    if (sf.b[i] < 0.0) {
      tb.row_sign[i] = -1.0;
      art_of_row[i] = tb.n_art++;
    }

  tb.t = Mat::Zero(m, n + m + tb.n_art + 1);
  tb.basis.assign(m, -1);
  for (int i = 0; i < m; ++i) {
    const double s = tb.row_sign[i];
    tb.t.row(i).head(n) = s * sf.A.row(i);
    tb.t(i, n + i) = s;  // slack
    tb.t(i, n + m + tb.n_art) = s * sf.b[i];
    if (art_of_row[i] >= 0) {
      tb.t(i, n + m + art_of_row[i]) = 1.0;
      tb.basis[i] = n + m + art_of_row[i];
    } else {
      tb.basis[i] = n + i;
    }
  }

  Solution sol;
  sol.x = Vec::Zero(prob.n());
  int iters_left = max_iters;

  // Phase 1: drive the artificials to zero.
  if (tb.n_art > 0) {
    Vec cost = Vec::Zero(tb.cols());
    cost.segment(n + m, tb.n_art).setOnes();
    double obj = 0.0;
    for (int i = 0; i < m; ++i)
      if (art_of_row[i] >= 0) {
        cost -= tb.t.row(i).head(tb.cols()).transpose();
        obj -= tb.t(i, tb.cols());
      }
    std::vector<bool> allowed(tb.cols(), true);
    bool unbounded = false;
    if (!run_phase(tb, cost, obj, allowed, iters_left, &unbounded)) {
      sol.status = Status::IterationLimit;
      return sol;
    }
    if (-obj > 1e-7 * (1.0 + sf.b.cwiseAbs().maxCoeff())) {
      sol.status = Status::Infeasible;
      return sol;
    }
    // Pivot remaining artificials out of the basis where a structural or
    // slack column allows it; rows that do not are redundant and harmless.
    for (int i = 0; i < m; ++i) {
      if (tb.basis[i] < n + m) continue;
      for (int j = 0; j < n + m; ++j) {
        if (std::abs(tb.t(i, j)) > 1e-8) {
          const double piv = tb.t(i, j);
          tb.t.row(i) /= piv;
          for (int r = 0; r < m; ++r)
            if (r != i && tb.t(r, j) != 0.0) tb.t.row(r) -= tb.t(r, j) * tb.t.row(i);
          tb.basis[i] = j;
          break;
        }
      }
    }
  }

  // Phase 2 on the real objective, artificial columns barred.
  Vec cost = Vec::Zero(tb.cols());
  cost.head(n) = sf.c;
  double obj = 0.0;
  for (int i = 0; i < m; ++i) {
    const double cb = cost[tb.basis[i]];
    if (cb != 0.0) {
      cost -= cb * tb.t.row(i).head(tb.cols()).transpose();
      obj -= cb * tb.t(i, tb.cols());
    }
  }
  std::vector<bool> allowed(tb.cols(), true);
  for (int a = 0; a < tb.n_art; ++a) allowed[n + m + a] = false;
  bool unbounded = false;
  if (!run_phase(tb, cost, obj, allowed, iters_left, &unbounded)) {
    sol.status = Status::IterationLimit;
    return sol;
  }
  if (unbounded) {
    sol.status = Status::Unbounded;
    return sol;
  }

  Vec z = Vec::Zero(n);
  for (int i = 0; i < m; ++i)
    if (tb.basis[i] < n) z[tb.basis[i]] = tb.t(i, tb.cols());
  sol.x = z + prob.lb;
  sol.objective = prob.c.dot(sol.x);
  sol.dual_row = cost.segment(n, m);
  sol.reduced_cost = cost.head(n);
  sol.status = Status::Optimal;
  return sol;
}

bool check_certificate(const Problem& prob, const Solution& sol, double tol) {
  if (sol.status != Status::Optimal) return false;
  const StandardForm sf = standardize(prob);
  const int n = static_cast<int>(sf.c.size());
  const int m = static_cast<int>(sf.b.size());
  if (sol.dual_row.size() != m || sol.reduced_cost.size() != n) return false;

  const Vec z = sol.x - prob.lb;
  const Vec slack = sf.b - sf.A * z;
  const Vec y = sol.dual_row;
  const Vec r = sf.c + sf.A.transpose() * y;

  const double scale = 1.0 + std::abs(sf.c.dot(z)) + sf.b.cwiseAbs().sum();
  if (std::abs(prob.c.dot(sol.x) - sol.objective) > tol * scale) return false;
  if ((z.array() < -tol).any()) return false;
  if ((slack.array() < -tol * scale).any()) return false;
  if ((y.array() < -tol).any()) return false;
  if ((r.array() < -tol * scale).any()) return false;
  if ((sol.reduced_cost - r).cwiseAbs().maxCoeff() > tol * scale) return false;
  for (int i = 0; i < m; ++i)
    if (std::abs(y[i] * slack[i]) > tol * scale) return false;
  for (int j = 0; j < n; ++j)
    if (std::abs(r[j] * z[j]) > tol * scale) return false;
  return std::abs(sf.c.dot(z) + sf.b.dot(y)) <= tol * scale;
}

}  // namespace gridsi::lp
