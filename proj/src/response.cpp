#include "gridsi/response.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace gridsi {

namespace {

constexpr double kZeroEigTol = 1e-10;

double check_real(Complex z, double scale) {
  if (std::abs(z.imag()) > 1e-9 * std::max(1.0, std::max(std::abs(z.real()), scale)))
    throw NumericalError("imaginary residual in modal sum (conjugate structure broken)");
  return z.real();
}

// Modal data of one (output, disturbance) pair, active modes only.
struct PairModes {
  std::vector<Complex> lam, r, k;
  double scale = 0.0;  // max |r| within the pair

  bool empty() const { return lam.empty(); }

  // n-th time derivative of the step response; order 0 is the response itself.
  Complex eval(double t, int order) const {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < lam.size(); ++i) {
      const Complex e = std::exp(lam[i] * t);
      if (order == 0) {
        acc += k[i] * (1.0 - e);
      } else {
        Complex p = r[i];
        for (int q = 1; q < order; ++q) p *= lam[i];
        acc += p * e;
      }
    }
    return acc;
  }
};

PairModes collect_pair(const ResidueSet& res, int o, int j, double global_scale) {
  PairModes p;
  double pair_max = 0.0;
  for (int i = 0; i < res.n_modes(); ++i)
    if (!res.inert[i]) pair_max = std::max(pair_max, std::abs(res.r[i](o, j)));
  if (pair_max <= 1e-14 * global_scale) return p;  // structurally silent pair
  for (int i = 0; i < res.n_modes(); ++i) {
    if (res.inert[i]) continue;
    const Complex ri = res.r[i](o, j);
    if (std::abs(ri) <= 1e-16 * global_scale) continue;
    p.lam.push_back(res.lambda[i]);
    p.r.push_back(ri);
    p.k.push_back(res.k[i](o, j));
  }
  p.scale = pair_max;
  return p;
}

struct PairExtremum {
  double value = 0.0;  // signed
  double time = 0.0;
  bool boundary = true;
  bool converged = true;
};

// deriv_order 0: extremum of y. deriv_order 1: extremum of ydot.
PairExtremum search_extremum(const PairModes& p, int deriv_order,
                             const SearchOptions& opt, double seed) {
  PairExtremum out;
  if (p.empty()) return out;

  double re_min = std::numeric_limits<double>::infinity();
  double im_max = 0.0;
  for (const Complex& l : p.lam) {
    if (!(l.real() < 0.0))
      throw NumericalError("step response has an unstable or marginal mode");
    re_min = std::min(re_min, -l.real());
    im_max = std::max(im_max, std::abs(l.imag()));
  }
  const double horizon = std::min(opt.horizon_cap, 10.0 / re_min);
  double dt = horizon / opt.grid_points;
  if (im_max > 0.0) dt = std::min(dt, kPi / im_max);
  const long n_grid = std::min<long>(200000, std::lround(std::ceil(horizon / dt))) + 1;
  dt = horizon / static_cast<double>(n_grid - 1);

  auto f = [&](double t, int extra) {
    return check_real(p.eval(t, deriv_order + extra), p.scale);
  };

  double grid_max = 0.0, deriv_max = 0.0;
  long grid_arg = 0;
  std::vector<double> grid_val(n_grid);
  for (long g = 0; g < n_grid; ++g) {
    const double t = g * dt;
    const double v = f(t, 0);
    grid_val[g] = v;
    if (std::abs(v) > grid_max) {
      grid_max = std::abs(v);
      grid_arg = g;
    }
    deriv_max = std::max(deriv_max, std::abs(f(t, 1)));
  }

  double best = -1.0;
  auto consider = [&](double t, bool bnd, bool conv) {
    const double v = f(t, 0);
    if (std::abs(v) > best) {
      best = std::abs(v);
      out.value = v;
      out.time = t;
      out.boundary = bnd;
      out.converged = conv;
    }
  };

  // Boundary candidates: the horizon always, t = 0 only for derivatives
  // (the step response itself starts at zero).
  consider(horizon, true, true);
  if (deriv_order >= 1) consider(0.0, true, true);

  if (deriv_max <= 1e-15 * p.scale) {
    // Flat profile; the grid maximum is as good as it gets.
    consider(grid_arg * dt, grid_arg == 0 || grid_arg == n_grid - 1, true);
    return out;
  }

  auto newton = [&](double t0) -> bool {
    double t = t0;
    int clamps = 0;
    for (int it = 0; it < opt.max_newton; ++it) {
      const double f1 = f(t, 1);
      if (std::abs(f1) <= opt.stationarity_tol * deriv_max) {
        consider(t, false, true);
        return true;
      }
      const double f2 = f(t, 2);
      if (std::abs(f2) < 1e-300 || !std::isfinite(f2)) return false;
      t -= f1 / f2;
      if (!std::isfinite(t)) return false;
      if (t < 0.0 || t > horizon) {
        t = std::clamp(t, 0.0, horizon);
        if (++clamps > 2) return false;
      }
    }
    return false;
  };

  newton(grid_arg * dt);
  if (seed > 0.0 && seed < horizon) newton(seed);

  // The reported extremum must dominate the bootstrap grid. Chase any grid
  // point that still exceeds it; fall back to local refinement when Newton
  // cannot lock on.
  const double dom_tol = 1e-9 * std::max(grid_max, best);
  for (int pass = 0; pass < 5; ++pass) {
    long worst = -1;
    double excess = dom_tol;
    for (long g = 0; g < n_grid; ++g)
      if (std::abs(grid_val[g]) - best > excess) {
        excess = std::abs(grid_val[g]) - best;
        worst = g;
      }
    if (worst < 0) break;
    if (!newton(worst * dt)) {
      const double lo = std::max(0.0, worst * dt - dt);
      const double hi = std::min(horizon, worst * dt + dt);
      double bt = worst * dt, bv = std::abs(grid_val[worst]);
      for (int q = 0; q <= 200; ++q) {
        const double t = lo + (hi - lo) * q / 200.0;
        const double v = std::abs(f(t, 0));
        if (v > bv) {
          bv = v;
          bt = t;
        }
      }
      consider(bt, false, false);
      break;
    }
  }
  return out;
}

ExtremaField search_field(const ResidueSet& res, int deriv_order,
                          const SearchOptions& opt, const Mat* seeds, ExecMode exec) {
  ExtremaField out;
  out.value = Mat::Zero(res.m, res.d);
  out.time = Mat::Zero(res.m, res.d);
  out.boundary = MatU8::Ones(res.m, res.d);
  out.converged = MatU8::Ones(res.m, res.d);

  double global_scale = 0.0;
  for (int i = 0; i < res.n_modes(); ++i)
    if (!res.inert[i]) global_scale = std::max(global_scale, res.r[i].cwiseAbs().maxCoeff());

  std::exception_ptr failure;
  std::mutex failure_mutex;
  parallel_for(res.m * res.d, exec, [&](int idx) {
    const int o = idx / res.d, j = idx % res.d;
    try {
      const PairModes p = collect_pair(res, o, j, global_scale);
      const double seed = seeds ? (*seeds)(o, j) : -1.0;
      const PairExtremum e = search_extremum(p, deriv_order, opt, seed);
      out.value(o, j) = e.value;
      out.time(o, j) = e.time;
      out.boundary(o, j) = e.boundary ? 1 : 0;
      out.converged(o, j) = e.converged ? 1 : 0;
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

ResidueSet residues(const ModalData& modal, const Mat& B, const Mat& C) {
  const int n = modal.n();
  ResidueSet res;
  res.m = static_cast<int>(C.rows());
  res.d = static_cast<int>(B.cols());
  res.lambda = modal.eigenvalues;
  res.inert.assign(n, 0);

  const CMat cu = C.cast<Complex>() * modal.right;  // m x n
  const CMat lb = modal.left * B.cast<Complex>();   // n x d

  double scale = 0.0;
  for (int i = 0; i < n; ++i) {
    res.r.push_back(cu.col(i) * lb.row(i));
    scale = std::max(scale, res.r.back().cwiseAbs().maxCoeff());
  }

  for (int i = 0; i < n; ++i) {
    const double rmax = res.r[i].cwiseAbs().maxCoeff();
    if (std::abs(res.lambda[i]) < kZeroEigTol) {
      if (rmax > 1e-9 * scale)
        throw NumericalError(
            "eigenvalue at the origin with nonvanishing residue: step coefficients "
            "are undefined");
      res.inert[i] = 1;
      res.k.push_back(CMat::Zero(res.m, res.d));
    } else {
      res.k.push_back(-res.r[i] / res.lambda[i]);
    }
  }
  return res;
}

Mat step_response(const ResidueSet& res, const Mat& times, int order, ExecMode exec) {
  if (times.rows() != res.m || times.cols() != res.d)
    throw InputError("time matrix shape does not match (outputs x disturbances)");
  if (order < 0) throw InputError("derivative order must be nonnegative");
  if ((times.array() < 0.0).any()) throw InputError("times must be nonnegative");

  double global_scale = 0.0;
  for (int i = 0; i < res.n_modes(); ++i)
    if (!res.inert[i]) global_scale = std::max(global_scale, res.r[i].cwiseAbs().maxCoeff());

  Mat out = Mat::Zero(res.m, res.d);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  parallel_for(res.m * res.d, exec, [&](int idx) {
    const int o = idx / res.d, j = idx % res.d;
    try {
      const PairModes p = collect_pair(res, o, j, global_scale);
      if (!p.empty()) out(o, j) = check_real(p.eval(times(o, j), order), p.scale);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);
  return out;
}

ExtremaField find_overshoot(const ResidueSet& res, const SearchOptions& opt,
                            const Mat* seed_times, ExecMode exec) {
  return search_field(res, 0, opt, seed_times, exec);
}

ExtremaField find_rocof(const ResidueSet& res, const SearchOptions& opt,
                        const Mat* seed_times, ExecMode exec) {
  return search_field(res, 1, opt, seed_times, exec);
}

ResidueSensitivity residue_sensitivity(const ModalData& modal, const ResidueSet& res,
                                       const Mat& B, const Mat& C,
                                       const std::vector<SparseEntry>& dA) {
  const int n = modal.n();
  ResidueSensitivity s;
  s.dlambda = eig_sensitivity(modal, dA);

  const CMat cu = C.cast<Complex>() * modal.right;
  const CMat lb = modal.left * B.cast<Complex>();
  const double gap_tol = modal.degeneracy_threshold();

  auto apply = [&](int j, int i) {  // l_j * dA * u_i
    Complex acc = 0.0;
    for (const auto& e : dA) acc += e.value * modal.left(j, e.row) * modal.right(e.col, i);
    return acc;
  };
  double entry_scale = 0.0;
  for (const auto& e : dA) entry_scale = std::max(entry_scale, std::abs(e.value));

  for (int i = 0; i < n; ++i) {
    CVec v1 = CVec::Zero(res.m);
    Eigen::RowVectorXcd w2 = Eigen::RowVectorXcd::Zero(res.d);
    const Complex li = modal.eigenvalues[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Complex gap = li - modal.eigenvalues[j];
      const Complex num_ij = apply(j, i);
      const Complex num_ji = apply(i, j);
      if (std::abs(gap) < gap_tol) {
        const double couple_tol =
            1e-9 * entry_scale *
            std::max(modal.left.row(j).cwiseAbs().maxCoeff() *
                         modal.right.col(i).cwiseAbs().maxCoeff(),
                     modal.left.row(i).cwiseAbs().maxCoeff() *
                         modal.right.col(j).cwiseAbs().maxCoeff());
        if (std::abs(num_ij) <= couple_tol && std::abs(num_ji) <= couple_tol) continue;
        throw DegenerateSpectrumError(
            "eigenvalues of modes " + std::to_string(i) + " and " + std::to_string(j) +
                " are degenerate under this perturbation",
            i, j);
      }
      v1 += cu.col(j) * (num_ij / gap);
      w2 += (num_ji / (-gap)) * lb.row(j);
    }
    s.dr.push_back(v1 * lb.row(i) - cu.col(i) * w2);
    if (res.inert[i]) {
      s.dk.push_back(CMat::Zero(res.m, res.d));
    } else {
      s.dk.push_back(-(s.dr.back() * li - res.r[i] * s.dlambda[i]) / (li * li));
    }
  }
  return s;
}

namespace {

// Shared accumulation for the extremum sensitivities. deriv_order matches the
// searched field (0: overshoot, 1: rocof).
Mat extremum_sensitivity(const ResidueSet& res, const ResidueSensitivity& sens,
                         const ExtremaField& peaks, int deriv_order) {
  Mat out = Mat::Zero(res.m, res.d);
  for (int o = 0; o < res.m; ++o) {
    for (int j = 0; j < res.d; ++j) {
      const double t = peaks.time(o, j);
      const bool boundary = peaks.boundary(o, j) != 0;

      Complex y1 = 0, y2 = 0, y3 = 0, p1 = 0, p2 = 0, p3 = 0;
      double scale = 0.0;
      for (int i = 0; i < res.n_modes(); ++i) {
        if (res.inert[i]) continue;
        const Complex l = res.lambda[i];
        const Complex r = res.r[i](o, j);
        const Complex dl = sens.dlambda[i];
        const Complex dr = sens.dr[i](o, j);
        const Complex e = std::exp(l * t);
        scale = std::max(scale, std::abs(r));
        y1 += r * e;
        y2 += r * l * e;
        y3 += r * l * l * e;
        p1 += (dr + r * t * dl) * e;
        p2 += (dr * l + r * dl + r * l * t * dl) * e;
        p3 += (dr * l * l + 2.0 * r * l * dl + r * l * l * t * dl) * e;
      }

      double dt_shift = 0.0;
      if (!boundary) {
        if (deriv_order == 0) {
          const double denom = check_real(y2, scale) * check_real(y2, scale);
          if (denom > 1e-24 * scale * scale)
            dt_shift = -(check_real(p1, scale) * check_real(y2, scale) -
                         check_real(y1, scale) * check_real(p2, scale)) /
                       denom;
        } else {
          const double denom = check_real(y3, scale) * check_real(y3, scale);
          if (denom > 1e-24 * scale * scale)
            dt_shift = -(check_real(p2, scale) * check_real(y3, scale) -
                         check_real(y2, scale) * check_real(p3, scale)) /
                       denom;
        }
      }

      Complex dv = 0;
      for (int i = 0; i < res.n_modes(); ++i) {
        if (res.inert[i]) continue;
        const Complex l = res.lambda[i];
        const Complex dl = sens.dlambda[i];
        const Complex e = std::exp(l * t);
        if (deriv_order == 0) {
          dv += sens.dk[i](o, j) * (1.0 - e) -
                res.k[i](o, j) * (dl * t + l * dt_shift) * e;
        } else {
          dv += (sens.dr[i](o, j) + res.r[i](o, j) * t * dl +
                 res.r[i](o, j) * l * dt_shift) *
                e;
        }
      }
      out(o, j) = check_real(dv, scale);
    }
  }
  return out;
}

}  // namespace

Mat overshoot_sensitivity(const ResidueSet& res, const ResidueSensitivity& sens,
                          const ExtremaField& peaks) {
  return extremum_sensitivity(res, sens, peaks, 0);
}

Mat rocof_sensitivity(const ResidueSet& res, const ResidueSensitivity& sens,
                      const ExtremaField& peaks) {
  return extremum_sensitivity(res, sens, peaks, 1);
}

StepOracle::StepOracle(Mat A, Mat B, Mat C, OracleOptions opt)
    : a_(std::move(A)), b_(std::move(B)), c_(std::move(C)), opt_(opt) {
  if (a_.rows() != a_.cols() || b_.rows() != a_.rows() || c_.cols() != a_.rows())
    throw InputError("oracle system dimensions are inconsistent");
  ca_ = c_ * a_;
}

OracleTrajectory StepOracle::sample(const Vec& times) const {
  const int n = static_cast<int>(a_.rows());
  const int m = static_cast<int>(c_.rows());
  const int d = static_cast<int>(b_.cols());
  const int nt = static_cast<int>(times.size());
  for (int i = 0; i < nt; ++i) {
    if (times[i] < 0.0) throw InputError("oracle sample times must be nonnegative");
    if (i > 0 && times[i] < times[i - 1])
      throw InputError("oracle sample times must be ascending");
  }

  // Dormand-Prince 5(4) coefficients (stage abscissae drop out: the system is
  // autonomous).
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  OracleTrajectory traj;
  traj.y.assign(d, Mat::Zero(m, nt));
  traj.yd.assign(d, Mat::Zero(m, nt));
  traj.ydd.assign(d, Mat::Zero(m, nt));

  for (int col = 0; col < d; ++col) {
    const Vec u = b_.col(col);
    auto fdot = [&](const Vec& x) -> Vec { return a_ * x + u; };

    Vec x = Vec::Zero(n);
    double t = 0.0;
    int next = 0;
    auto record = [&](int idx) {
      const Vec rate = fdot(x);
      traj.y[col].col(idx) = c_ * x;
      traj.yd[col].col(idx) = c_ * rate;
      traj.ydd[col].col(idx) = ca_ * rate;
    };
    while (next < nt && times[next] <= 0.0) record(next++);
    if (next >= nt) continue;

    double h = std::min(1e-3, times[nt - 1] / 100.0 + 1e-9);
    Vec k1 = fdot(x);
    long steps = 0;
    while (next < nt) {
      if (++steps > opt_.max_steps)
        throw NumericalError("oracle integration exceeded the step budget");
      const double target = times[next];
      bool landing = false;
      double hs = h;
      if (t + hs >= target) {
        hs = target - t;
        landing = true;
      }

      const Vec k2 = fdot(x + hs * (a21 * k1));
      const Vec k3 = fdot(x + hs * (a31 * k1 + a32 * k2));
      const Vec k4 = fdot(x + hs * (a41 * k1 + a42 * k2 + a43 * k3));
      const Vec k5 = fdot(x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const Vec k6 = fdot(x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Vec x5 = x + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Vec k7 = fdot(x5);
      const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      double norm = 0.0;
      for (int i = 0; i < n; ++i) {
        const double w = opt_.abs_tol + opt_.rel_tol * std::max(std::abs(x[i]), std::abs(x5[i]));
        norm += (err[i] / w) * (err[i] / w);
      }
      norm = std::sqrt(norm / n);

      const bool accepted = norm <= 1.0;
      if (accepted) {
        t += hs;
        x = x5;
        k1 = k7;  // first-same-as-last
        if (landing) {
          t = target;
          record(next++);
          while (next < nt && times[next] <= t) record(next++);
        }
      }
      double factor = std::clamp(0.9 * std::pow(std::max(norm, 1e-12), -0.2), 0.2, 5.0);
      if (!accepted) factor = std::min(factor, 1.0);
      // A step shortened only to land on a sample time says nothing about
      // accuracy; keep the controller's step in that case.
      if (!(landing && accepted)) h = hs * factor;
      if (h < 1e-13 * std::max(1.0, t))
        throw NumericalError("oracle step size underflow");
    }
  }
  return traj;
}

}  // namespace gridsi
