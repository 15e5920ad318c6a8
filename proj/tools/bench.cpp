#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "gridsi/capability.hpp"
#include "gridsi/netmodel.hpp"
#include "gridsi/placement.hpp"
#include "gridsi/response.hpp"

using namespace gridsi;

namespace {

// Synthetic string-topology case: per area one generator bus and one load bus
// carrying a device, so every fan-out dimension grows with the area count.
PowerSystemCase make_case(int areas) {
  PowerSystemCase cs;
  cs.nominal_frequency_hz = 50.0;
  for (int a = 0; a < areas; ++a) {
    const std::string g = "g" + std::to_string(a);
    const std::string l = "l" + std::to_string(a);
    cs.buses.push_back({g});
    cs.buses.push_back({l});
    cs.generators.push_back({g, 4.0 + (a % 3), 1.0 + 0.2 * (a % 2), 1.0});
    cs.loads.push_back({l, 0.8, 0.1, 1.5, 2.5});
    cs.lines.push_back({g, l, 8.0});
    if (a > 0) cs.lines.push_back({"l" + std::to_string(a - 1), g, 5.0 + 0.5 * (a % 4)});
    Device dev;
    dev.id = "dev" + std::to_string(a);
    dev.bus = l;
    dev.t1 = 0.02 + 0.003 * a;
    dev.t2 = 0.05 + 0.002 * a;
    dev.capacity = 1.0;
    cs.devices.push_back(dev);
  }
  cs.disturbances.push_back({"l0", -0.1});
  cs.disturbances.push_back({"l" + std::to_string(areas - 1), 0.08});
  cs.outputs = {"g0", "g" + std::to_string(areas / 2), "g" + std::to_string(areas - 1)};
  return cs;
}

template <class F>
double best_ms(int repeats, F&& body) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-22s %12.3f %12.3f %9.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Timing of the parallel kernels against their serial reference"};
  int areas = 12, repeats = 5, grid = 4000;
  app.add_option("--areas", areas, "areas in the synthetic case");
  app.add_option("--repeats", repeats, "repetitions per kernel (best time wins)");
  app.add_option("--grid", grid, "duality verification grid");
  CLI11_PARSE(app, argc, argv);

  const PowerSystemCase cs = make_case(areas);
  const DeviceGains gains = DeviceGains::from_case(cs);
  const LinearSystem sys = attach_devices(build_base_system(cs), cs, gains);
  const ModalData modal = eigensolve(sys.A);
  const ResidueSet res = residues(modal, sys.B, sys.C);
  SearchOptions opt;

  std::printf("system: %d states, %d params, %d outputs x %d disturbances\n", sys.n(),
              static_cast<int>(sys.params.size()), sys.n_outputs(), sys.n_inputs());
#ifdef _OPENMP
  std::printf("openmp: %d thread(s)\n\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled at build time\n\n");
#endif
  std::printf("%-22s %12s %12s %10s\n", "kernel", "serial_ms", "parallel_ms", "speedup");

  const ExtremaField peaks_s = find_overshoot(res, opt, nullptr, ExecMode::Serial);
  const ExtremaField peaks_r = find_rocof(res, opt, nullptr, ExecMode::Serial);
  std::vector<int> osc;
  for (int i = 0; i < modal.n(); ++i)
    if (modal.oscillatory(i)) osc.push_back(i);

  row("extremum_search",
      best_ms(repeats,
              [&] {
                find_overshoot(res, opt, nullptr, ExecMode::Serial);
                find_rocof(res, opt, nullptr, ExecMode::Serial);
              }),
      best_ms(repeats, [&] {
        find_overshoot(res, opt, nullptr, ExecMode::Parallel);
        find_rocof(res, opt, nullptr, ExecMode::Parallel);
      }));

  row("sensitivity_sweep",
      best_ms(repeats,
              [&] {
                sensitivity_sweep(sys, modal, res, peaks_s, peaks_r, osc, ExecMode::Serial);
              }),
      best_ms(repeats, [&] {
        sensitivity_sweep(sys, modal, res, peaks_s, peaks_r, osc, ExecMode::Parallel);
      }));

  CapabilityBall ball;
  ball.p = NormOrder::Two;
  ball.h = 1.0;
  ball.c = 0.1;
  const GainConstraint gc = dual_constraint(ball, 1.0);
  row("duality_grid",
      best_ms(repeats, [&] { verify_duality(gc, ball, 1.0, grid, ExecMode::Serial); }),
      best_ms(repeats, [&] { verify_duality(gc, ball, 1.0, grid, ExecMode::Parallel); }));

  return 0;
}
