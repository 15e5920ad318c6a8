// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line and
// the process exits with the number of failures, so this binary doubles as a
// quick health report for the whole pipeline.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <gridsi/capability.hpp>
#include <gridsi/netmodel.hpp>
#include <gridsi/placement.hpp>
#include <gridsi/report.hpp>
#include <gridsi/response.hpp>
#include <gridsi/spectral.hpp>

#include "support.hpp"

using namespace gridsi;

namespace {

struct Outcome {
  bool pass = false;
  std::string note;
};

// Largest |a - b| over a class of values, normalized by the class magnitude.
class ScaledError {
 public:
  void add(double got, double want) {
    dev_ = std::max(dev_, std::abs(got - want));
    scale_ = std::max(scale_, std::abs(want));
  }
  void add(Complex got, Complex want) {
    dev_ = std::max(dev_, std::abs(got - want));
    scale_ = std::max(scale_, std::abs(want));
  }
  double value() const { return scale_ > 0.0 ? dev_ / scale_ : dev_; }

 private:
  double dev_ = 0.0, scale_ = 0.0;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Analytic parameter sensitivities vs central finite differences, with the
//    quadratic error decay that distinguishes a real derivative from a fluke.

Outcome check_sensitivities() {
  auto cs = testutil::load_data_case("case3bus.json");
  DeviceGains g;
  g.inertia = {0.3, 0.4};
  g.damping = {0.2, 0.5};
  const Vec gains = g.to_vector();
  MetricBundle bundle = evaluate(cs, g, ExecMode::Serial);

  // errors at eps = 1e-3, 1e-4, 1e-5: the first pair sits in the truncation
  // regime and shows the quadratic decay, the last shows final tightness
  const double steps[] = {1e-3, 1e-4, 1e-5};
  ScaledError eig[3], met[3];
  for (int p = 0; p < static_cast<int>(bundle.param_ids.size()); ++p) {
    const std::vector<SparseEntry> dA = {system_derivative(bundle.sys, bundle.param_ids[p])};
    const ResidueSensitivity an =
        residue_sensitivity(bundle.modal, bundle.res, bundle.sys.B, bundle.sys.C, dA);

    for (int k = 0; k < 3; ++k) {
      const testutil::FdResult fd = testutil::fd_derivatives(cs, gains, p, steps[k], bundle);

      for (int i = 0; i < bundle.modal.n(); ++i) {
        eig[k].add(fd.dlambda[i], an.dlambda[i]);
        for (int e = 0; e < fd.dr[i].size(); ++e) {
          eig[k].add(fd.dr[i].data()[e], an.dr[i].data()[e]);
          eig[k].add(fd.dk[i].data()[e], an.dk[i].data()[e]);
        }
      }
      for (size_t oi = 0; oi < bundle.osc_modes.size(); ++oi)
        eig[k].add(fd.dzeta[oi], bundle.dzeta(p, static_cast<int>(oi)));
      for (int o = 0; o < bundle.m; ++o)
        for (int j = 0; j < bundle.d; ++j) {
          met[k].add(fd.dovershoot(o, j), bundle.dovershoot(p, o * bundle.d + j));
          met[k].add(fd.drocof(o, j), bundle.drocof(p, o * bundle.d + j));
        }
    }
  }

  Outcome out;
  const bool match = eig[2].value() <= 1e-5 && met[2].value() <= 1e-3;
  // central differences are second order: a tenfold smaller step should cut
  // the mismatch ~100x until roundoff cancellation takes over
  const bool decays = eig[1].value() <= std::max(eig[0].value() / 20.0, 5e-9) &&
                      met[1].value() <= std::max(met[0].value() / 20.0, 5e-7);
  out.pass = match && decays;
  out.note = fmt("eig err %.1e -> %.1e -> %.1e, ", eig[0].value(), eig[1].value(),
                 eig[2].value()) +
             fmt("metric err %.1e -> %.1e -> %.1e", met[0].value(), met[1].value(),
                 met[2].value());
  return out;
}

// ---------------------------------------------------------------------------
// 2. Modal step responses vs an adaptive Runge-Kutta integration oracle on
//    random stable systems.

Outcome check_modal_vs_integration() {
  std::mt19937 rng(902210);
  std::uniform_int_distribution<int> size(2, 30);
  const Vec times = Vec::LinSpaced(41, 0.0, 20.0);

  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = size(rng);
    const Mat A = testutil::random_stable(n, rng);
    const Mat B = testutil::random_matrix(n, 2, rng);
    const Mat C = testutil::random_matrix(2, n, rng);
    const ResidueSet res = residues(eigensolve(A), B, C);

    OracleOptions opt;
    opt.rel_tol = 1e-12;
    opt.abs_tol = 1e-14;
    const OracleTrajectory ref = StepOracle(A, B, C, opt).sample(times);

    for (int s = 0; s < times.size(); ++s) {
      const Mat tm = Mat::Constant(2, 2, times[s]);
      for (int order = 0; order <= 2; ++order) {
        const Mat y = step_response(res, tm, order, ExecMode::Serial);
        for (int o = 0; o < 2; ++o)
          for (int j = 0; j < 2; ++j) {
            const Mat& r = order == 0 ? ref.y[j] : order == 1 ? ref.yd[j] : ref.ydd[j];
            worst = std::max(worst, std::abs(y(o, j) - r(o, s)));
          }
      }
    }
  }

  Outcome out;
  out.pass = worst <= 1e-8;
  out.note = fmt("max |modal - integrated| = %.2e over 20 systems", worst);
  return out;
}

// ---------------------------------------------------------------------------
// 3. The canonical second-order step: peak time pi/omega_d and relative
//    overshoot exp(-zeta*pi/sqrt(1-zeta^2)) at zeta = 0.5, omega_n = 1.

Outcome check_canonical_peak() {
  Mat A(2, 2), B(2, 1), C(1, 2);
  A << 0.0, 1.0, -1.0, -1.0;
  B << 0.0, 1.0;
  C << 1.0, 0.0;
  const ResidueSet res = residues(eigensolve(A), B, C);
  const ExtremaField peak = find_overshoot(res, SearchOptions{}, nullptr, ExecMode::Serial);

  const double tp_true = kPi / std::sqrt(0.75);
  const double mp_true = std::exp(-kPi / std::sqrt(3.0));
  const double y_inf = 1.0;
  const double tp = peak.time(0, 0);
  const double mp = (peak.value(0, 0) - y_inf) / y_inf;

  Outcome out;
  out.pass = std::abs(tp - tp_true) <= 1e-6 && std::abs(mp - mp_true) <= 1e-6 &&
             !peak.boundary(0, 0) && peak.converged(0, 0);
  out.note = fmt("tp err %.2e, overshoot err %.2e", std::abs(tp - tp_true),
                 std::abs(mp - mp_true));
  return out;
}

// ---------------------------------------------------------------------------
// 4. Norm-ball duality: the dual gain constraint reproduces the worst-case
//    device power on a dense sweep of the capability ball for p = 1, 2, inf.

Outcome check_duality() {
  struct Setup {
    NormOrder p;
    double h, c, p_bar;
  };
  const Setup setups[] = {{NormOrder::One, 1.0, 0.35, 1.2},
                          {NormOrder::Two, 1.6, 0.5, 0.8},
                          {NormOrder::Inf, 2.2, 0.12, 1.5}};

  double worst = 0.0;
  bool all_tight = true;
  for (const Setup& s : setups) {
    CapabilityBall ball;
    ball.p = s.p;
    ball.h = s.h;
    ball.c = s.c;
    const GainConstraint gc = dual_constraint(ball, s.p_bar);
    const DualityReport rep = verify_duality(gc, ball, s.p_bar, 10000, ExecMode::Serial);
    worst = std::max(worst, rep.worst_rel_err);
    all_tight = all_tight && rep.tight && rep.inflated_violates &&
                std::abs(rep.max_power - s.p_bar) <= 1e-6 * s.p_bar;
  }

  Outcome out;
  out.pass = all_tight && worst <= 1e-6;
  out.note = fmt("worst relative duality gap %.2e", worst);
  return out;
}

// ---------------------------------------------------------------------------
// 5. The SLP optimizer: accepted iterates never regress from any feasible
//    start, and on a single device it lands within 2% of the brute-force
//    grid optimum.

Outcome check_optimizer_descent() {
  PlacementConfig cfg;
  cfg.w_zeta = 1.0;
  cfg.max_iterations = 40;

  std::mt19937 rng(5150);
  std::uniform_real_distribution<double> u(0.0, 0.9);
  int monotone = 0;
  for (int run = 0; run < 20; ++run) {
    auto cs = testutil::load_data_case("case3bus.json");
    for (Device& dev : cs.devices) {
      dev.m_init = u(rng);
      dev.k_init = u(rng);
    }
    const PlacementResult res = place(cs, cfg, ExecMode::Serial);
    bool ok = true;
    double prev = std::numeric_limits<double>::infinity();
    for (const IterateRecord& rec : res.history) {
      if (!rec.accepted) continue;
      ok = ok && rec.objective <= prev + 1e-12;
      prev = rec.objective;
    }
    monotone += ok ? 1 : 0;
  }

  // brute-force reference on the one-device case: damping ratio over a
  // 200 x 200 grid of the box capability (p = 1, capacity 1)
  auto cs1 = testutil::load_data_case("case3bus_1dev.json");
  const LinearSystem base = build_base_system(cs1);
  double grid_best = -1.0;
  const int n_grid = 200;
  for (int im = 0; im < n_grid; ++im)
    for (int ik = 0; ik < n_grid; ++ik) {
      DeviceGains g;
      g.inertia = {im / double(n_grid - 1)};
      g.damping = {ik / double(n_grid - 1)};
      const ModalData modal = eigensolve(attach_devices(base, cs1, g).A);
      double zmin = 1.0;
      for (int i = 0; i < modal.n(); ++i)
        if (modal.oscillatory(i) && modal.eigenvalues[i].imag() > 0.0)
          zmin = std::min(zmin, damping_ratio(modal.eigenvalues[i]));
      grid_best = std::max(grid_best, zmin);
    }

  PlacementConfig cfg1;
  cfg1.w_zeta = 1.0;
  cfg1.max_iterations = 60;
  const PlacementResult res1 = place(cs1, cfg1, ExecMode::Serial);

  Outcome out;
  out.pass = monotone == 20 && res1.metrics.zeta_min >= 0.98 * grid_best;
  out.note = fmt("monotone runs %.0f/20, zeta %.4f%% vs grid %.4f%%",
                 double(monotone), res1.metrics.zeta_min * 100.0, grid_best * 100.0);
  return out;
}

// ---------------------------------------------------------------------------
// 6. Cost-mode differentiation: under a shared capacity budget each objective
//    wins on its own metric across the five-area case.

Outcome check_cost_modes() {
  const auto cs = testutil::load_data_case("case5area.json");
  const char* configs[] = {"config_area_zeta.json", "config_area_rocof.json",
                           "config_area_overshoot.json", "config_area_avg.json"};

  double zeta[4], r_inf[4], s_inf[4], avg[4];
  for (int k = 0; k < 4; ++k) {
    const PlacementConfig cfg =
        load_placement_config_file(testutil::data_path(configs[k]));
    const PlacementResult res = place(cs, cfg, ExecMode::Serial);
    zeta[k] = res.metrics.zeta_min;
    r_inf[k] = res.metrics.rocof_inf;
    s_inf[k] = res.metrics.overshoot_inf;
    avg[k] = res.metrics.overshoot_avg + res.metrics.rocof_avg;
  }

  auto argmax = [](const double* v) { return int(std::max_element(v, v + 4) - v); };
  auto argmin = [](const double* v) { return int(std::min_element(v, v + 4) - v); };

  Outcome out;
  out.pass = argmax(zeta) == 0 && argmin(r_inf) == 1 && argmin(s_inf) == 2 &&
             argmin(avg) == 3;
  std::ostringstream ss;
  ss << "winners: zeta->" << argmax(zeta) << " rocof->" << argmin(r_inf)
     << " overshoot->" << argmin(s_inf) << " avg->" << argmin(avg);
  out.note = ss.str();
  return out;
}

// ---------------------------------------------------------------------------
// 7. Minimum-capacity planning: zero when the RoCoF bound is already met,
//    positive and bound-respecting when it binds.

Outcome check_min_capacity() {
  const auto cs = testutil::load_data_case("case3bus.json");
  PlacementConfig cfg =
      load_placement_config_file(testutil::data_path("config_mincap.json"));

  PlacementConfig loose = cfg;
  loose.rocof_lo = -2.0;
  loose.rocof_hi = 2.0;  // device-free worst RoCoF is ~1.12 Hz/s
  const PlacementResult idle = min_capacity_place(cs, loose, ExecMode::Serial);

  const PlacementResult active = min_capacity_place(cs, cfg, ExecMode::Serial);

  Outcome out;
  out.pass = idle.total_capacity == 0.0 &&
             idle.gains.to_vector().cwiseAbs().maxCoeff() == 0.0 &&
             active.total_capacity > 0.0 && active.rocof_violation <= 1e-6 &&
             active.metrics.rocof_inf <= cfg.rocof_hi + 1e-6;
  out.note = fmt("slack bound capacity %.1f, binding bound capacity %.3f "
                 "(violation %.1e)",
                 idle.total_capacity, active.total_capacity, active.rocof_violation);
  return out;
}

// ---------------------------------------------------------------------------
// 8. Determinism: repeating a placement produces byte-identical documents.

Outcome check_determinism() {
  const auto cs = testutil::load_data_case("case3bus_1dev.json");
  const PlacementConfig cfg =
      load_placement_config_file(testutil::data_path("config_zeta.json"));

  const PlacementResult a = place(cs, cfg, ExecMode::Parallel);
  const PlacementResult b = place(cs, cfg, ExecMode::Parallel);

  const bool docs_equal = placement_json(cs, a, cfg) == placement_json(cs, b, cfg) &&
                          allocation_csv(cs, a) == allocation_csv(cs, b);
  ReportTable ta, tb;
  ta.add("optimized", a.metrics, a.gains);
  tb.add("optimized", b.metrics, b.gains);

  Outcome out;
  out.pass = docs_equal && ta.to_csv() == tb.to_csv();
  out.note = docs_equal ? "result, allocation and report bytes identical"
                        : "document bytes differ between runs";
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double time_limit_s;
  };
  const std::vector<Criterion> criteria = {
      {"sensitivities match finite differences with quadratic decay",
       check_sensitivities, 10.0},
      {"modal responses match adaptive integration to 1e-8", check_modal_vs_integration,
       30.0},
      {"canonical second-order peak time and overshoot", check_canonical_peak, 60.0},
      {"capability duality tight for p = 1, 2, inf", check_duality, 60.0},
      {"optimizer descends monotonically and attains the grid optimum",
       check_optimizer_descent, 120.0},
      {"each cost mode wins on its own metric", check_cost_modes, 300.0},
      {"minimum-capacity planning: slack vs binding bounds", check_min_capacity, 300.0},
      {"repeated placements emit byte-identical documents", check_determinism, 120.0},
  };

  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.note = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > criteria[i].time_limit_s) {
      out.pass = false;
      out.note += fmt(" [over %.0fs budget]", criteria[i].time_limit_s);
    }
    std::printf("[%s] %zu. %s (%.2fs) %s\n", out.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].name, elapsed, out.note.c_str());
    std::fflush(stdout);
    failures += out.pass ? 0 : 1;
  }
  return failures;
}
