#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include <gridsi/netmodel.hpp>
#include <gridsi/placement.hpp>
#include <gridsi/response.hpp>
#include <gridsi/simplex.hpp>
#include <gridsi/spectral.hpp>

namespace testutil {

using gridsi::Mat;
using gridsi::Vec;

inline std::string data_path(const std::string& name) {
  return std::string(GRIDSI_DATA_DIR) + "/" + name;
}

inline gridsi::PowerSystemCase load_data_case(const std::string& name) {
  return gridsi::load_case_file(data_path(name));
}

inline Mat random_matrix(int rows, int cols, std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

/// Random matrix shifted left until every eigenvalue satisfies Re < -margin.
inline Mat random_stable(int n, std::mt19937& rng, double margin = 0.5) {
  Mat a = random_matrix(n, n, rng);
  a /= std::sqrt(static_cast<double>(n));
  Eigen::EigenSolver<Mat> es(a);
  double worst = es.eigenvalues().real().maxCoeff();
  std::uniform_real_distribution<double> jitter(0.05, 0.5);
  a -= (worst + margin + jitter(rng)) * Mat::Identity(n, n);
  return a;
}

struct BruteLp {
  bool feasible = false;
  double objective = 0.0;
  Vec x;
};

/// Exhaustive vertex enumeration for tiny LPs. Requires finite bounds so the
/// feasible region is a polytope and the optimum sits on a vertex.
inline BruteLp brute_force_lp(const gridsi::lp::Problem& p) {
  const int n = p.n();
  const int m = p.m();
  Mat g(m + 2 * n, n);
  Vec h(m + 2 * n);
  g.topRows(m) = p.A;
  h.head(m) = p.b;
  g.block(m, 0, n, n) = -Mat::Identity(n, n);
  h.segment(m, n) = -p.lb;
  g.bottomRows(n) = Mat::Identity(n, n);
  h.tail(n) = p.ub;

  BruteLp best;
  const int rows = m + 2 * n;
  std::vector<int> pick(n);
  std::function<void(int, int)> recurse = [&](int start, int depth) {
    if (depth == n) {
      Mat gs(n, n);
      Vec hs(n);
      for (int i = 0; i < n; ++i) {
        gs.row(i) = g.row(pick[i]);
        hs[i] = h[pick[i]];
      }
      Eigen::FullPivLU<Mat> lu(gs);
      if (!lu.isInvertible()) return;
      Vec x = lu.solve(hs);
      if (((g * x).array() > h.array() + 1e-8).any()) return;
      double obj = p.c.dot(x);
      if (!best.feasible || obj < best.objective - 1e-12) {
        best.feasible = true;
        best.objective = obj;
        best.x = x;
      }
      return;
    }
    for (int r = start; r < rows; ++r) {
      pick[depth] = r;
      recurse(r + 1, depth + 1);
    }
  };
  recurse(0, 0);
  return best;
}

/// Index of the perturbed eigenvalue closest to a base eigenvalue.
inline int match_mode(const gridsi::CVec& eigs, gridsi::Complex target) {
  int best = 0;
  double dist = std::abs(eigs[0] - target);
  for (int i = 1; i < eigs.size(); ++i) {
    double d = std::abs(eigs[i] - target);
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return best;
}

/// Central-difference derivatives of modal and time-domain metrics w.r.t. one
/// registered device gain, recomputing everything at gains +- eps. Extremum
/// searches at the displaced gains are seeded with the base extremum times so
/// both sides track the same peak.
struct FdResult {
  gridsi::CVec dlambda;             // per base mode, matched by nearest eigenvalue
  std::vector<double> dzeta;        // per base oscillatory mode
  std::vector<gridsi::CMat> dr;     // per base mode
  std::vector<gridsi::CMat> dk;     // per base mode
  Mat dovershoot;                   // m x d signed extremum derivative
  Mat drocof;
};

inline FdResult fd_derivatives(const gridsi::PowerSystemCase& pc, const Vec& gains,
                               int param, double eps,
                               const gridsi::MetricBundle& base) {
  using namespace gridsi;
  auto eval_side = [&](double sign) {
    Vec g = gains;
    g[param] += sign * eps;
    LinearSystem base_sys = build_base_system(pc);
    LinearSystem sys = attach_devices(base_sys, pc, DeviceGains::from_vector(g));
    struct Side {
      ModalData modal;
      ResidueSet res;
      ExtremaField over, roc;
    } s{eigensolve(sys.A), {}, {}, {}};
    s.res = residues(s.modal, sys.B, sys.C);
    s.over = find_overshoot(s.res, {}, &base.t_overshoot, ExecMode::Serial);
    s.roc = find_rocof(s.res, {}, &base.t_rocof, ExecMode::Serial);
    return s;
  };
  auto hi = eval_side(+1.0);
  auto lo = eval_side(-1.0);

  const int n = base.modal.n();
  FdResult out;
  out.dlambda.resize(n);
  out.dr.resize(n);
  out.dk.resize(n);
  for (int i = 0; i < n; ++i) {
    int ih = match_mode(hi.modal.eigenvalues, base.modal.eigenvalues[i]);
    int il = match_mode(lo.modal.eigenvalues, base.modal.eigenvalues[i]);
    out.dlambda[i] = (hi.modal.eigenvalues[ih] - lo.modal.eigenvalues[il]) / (2.0 * eps);
    out.dr[i] = (hi.res.r[ih] - lo.res.r[il]) / (2.0 * eps);
    out.dk[i] = (hi.res.k[ih] - lo.res.k[il]) / (2.0 * eps);
  }
  for (int o : base.osc_modes) {
    int ih = match_mode(hi.modal.eigenvalues, base.modal.eigenvalues[o]);
    int il = match_mode(lo.modal.eigenvalues, base.modal.eigenvalues[o]);
    out.dzeta.push_back((damping_ratio(hi.modal.eigenvalues[ih]) -
                         damping_ratio(lo.modal.eigenvalues[il])) /
                        (2.0 * eps));
  }
  const double to_hz = 1.0 / (2.0 * kPi);
  out.dovershoot = (hi.over.value - lo.over.value) * (to_hz / (2.0 * eps));
  out.drocof = (hi.roc.value - lo.roc.value) * (to_hz / (2.0 * eps));
  return out;
}

}  // namespace testutil
