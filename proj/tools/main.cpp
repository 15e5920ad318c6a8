#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gridsi/netmodel.hpp"
#include "gridsi/placement.hpp"
#include "gridsi/report.hpp"
#include "gridsi/response.hpp"

namespace fs = std::filesystem;
using namespace gridsi;

namespace {

constexpr double kToHz = 1.0 / (2.0 * kPi);

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << content;
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-') c = '_';
  return s;
}

DeviceGains load_gains_file(const std::string& path, const PowerSystemCase& sys_case) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open gains file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("gains file: ") + e.what());
  }
  DeviceGains gains = DeviceGains::zeros(static_cast<int>(sys_case.devices.size()));
  for (const auto& [id, entry] : j.items()) {
    const int v = sys_case.device_index(id);
    if (v < 0) throw InputError("gains file names unknown device '" + id + "'");
    if (entry.contains("inertia")) gains.inertia[v] = entry["inertia"].get<double>();
    if (entry.contains("damping")) gains.damping[v] = entry["damping"].get<double>();
  }
  return gains;
}

double trajectory_horizon(const MetricBundle& b) {
  double t = 10.0;
  if (b.t_overshoot.size() > 0) t = std::max(t, 2.0 * b.t_overshoot.maxCoeff());
  if (b.t_rocof.size() > 0) t = std::max(t, 2.0 * b.t_rocof.maxCoeff());
  return std::min(t, 60.0);
}

struct TrajectoryData {
  std::vector<double> times;
  std::vector<std::vector<double>> y;   // per pair o*d + j, Hz
  std::vector<std::vector<double>> yd;  // Hz/s
};

TrajectoryData sample_trajectories(const MetricBundle& b, int n_samples) {
  TrajectoryData traj;
  const double horizon = trajectory_horizon(b);
  const int md = b.m * b.d;
  traj.y.assign(md, {});
  traj.yd.assign(md, {});
  for (int s = 0; s < n_samples; ++s) {
    const double t = horizon * s / (n_samples - 1);
    traj.times.push_back(t);
    const Mat tm = Mat::Constant(b.m, b.d, t);
    const Mat y0 = step_response(b.res, tm, 0);
    const Mat y1 = step_response(b.res, tm, 1);
    for (int ij = 0; ij < md; ++ij) {
      traj.y[ij].push_back(y0(ij / b.d, ij % b.d) * kToHz);
      traj.yd[ij].push_back(y1(ij / b.d, ij % b.d) * kToHz);
    }
  }
  return traj;
}

void write_trajectories(const fs::path& dir, const std::string& prefix,
                        const PowerSystemCase& sys_case, const MetricBundle& b) {
  const TrajectoryData traj = sample_trajectories(b, 501);
  for (int o = 0; o < b.m; ++o)
    for (int j = 0; j < b.d; ++j) {
      // the disturbance index keeps names unique when one bus is hit twice
      const std::string name = "traj_" + prefix + sanitize(sys_case.outputs[o]) + "_" +
                               std::to_string(j) + "_" +
                               sanitize(sys_case.disturbances[j].bus) + ".csv";
      const int ij = o * b.d + j;
      write_file(dir / name, trajectory_csv(traj.times, traj.y[ij], traj.yd[ij]));
    }
}

// Modal response against the adaptive integrator on a shared time grid;
// returns the largest |difference| in Hz (value) and Hz/s (derivative).
double cross_check(const MetricBundle& b, int n_samples) {
  const double horizon = trajectory_horizon(b);
  Vec times(n_samples);
  for (int s = 0; s < n_samples; ++s) times[s] = horizon * s / (n_samples - 1);

  StepOracle oracle(b.sys.A, b.sys.B, b.sys.C, OracleOptions{});
  const OracleTrajectory ref = oracle.sample(times);

  double worst = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const Mat tm = Mat::Constant(b.m, b.d, times[s]);
    const Mat y0 = step_response(b.res, tm, 0);
    const Mat y1 = step_response(b.res, tm, 1);
    for (int o = 0; o < b.m; ++o)
      for (int j = 0; j < b.d; ++j) {
        worst = std::max(worst, std::abs(y0(o, j) - ref.y[j](o, s)) * kToHz);
        worst = std::max(worst, std::abs(y1(o, j) - ref.yd[j](o, s)) * kToHz);
      }
  }
  return worst;
}

MeasurementSet synthetic_cloud(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> freq(0.0, 0.05), rate(0.0, 0.04);
  MeasurementSet data;
  for (int k = 0; k < n; ++k) {
    data.time.push_back(k);
    data.omega.push_back(freq(rng));
    data.rocof.push_back(rate(rng));
  }
  return data;
}

int cmd_analyze(const std::string& case_path, const std::string& gains_path,
                const std::string& out_dir, bool verify) {
  const PowerSystemCase sys_case = load_case_file(case_path);
  const DeviceGains gains = gains_path.empty()
                                ? DeviceGains::from_case(sys_case)
                                : load_gains_file(gains_path, sys_case);
  const MetricBundle bundle = evaluate(sys_case, gains);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  ReportTable table;
  table.add(fs::path(case_path).stem().string(), bundle, gains);
  write_file(dir / "report.csv", table.to_csv());
  write_file(dir / "report.txt", table.to_text());
  write_file(dir / "metrics.json", metrics_json(sys_case, bundle, gains));
  write_trajectories(dir, "", sys_case, bundle);
  std::cout << table.to_text();

  if (verify) {
    const double err = cross_check(bundle, 101);
    std::cout << "verify: max modal/oracle mismatch " << err << "\n";
    if (err > 1e-6) {
      std::cerr << "verification failed: mismatch " << err << " exceeds 1e-6\n";
      return 3;
    }
  }
  return 0;
}

int cmd_place(const std::string& case_path, const std::string& config_path,
              const std::string& out_dir, bool verify) {
  const PowerSystemCase sys_case = load_case_file(case_path);
  const PlacementConfig config = load_placement_config_file(config_path);

  const DeviceGains initial = DeviceGains::from_case(sys_case);
  const MetricBundle before = evaluate(sys_case, initial);
  const PlacementResult result = config.mode == CapacityMode::Variable
                                     ? min_capacity_place(sys_case, config)
                                     : place(sys_case, config);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  ReportTable table;
  table.add("initial", before, initial);
  table.add("optimized", result.metrics, result.gains);
  write_file(dir / "report.csv", table.to_csv());
  write_file(dir / "report.txt", table.to_text());
  write_file(dir / "result.json", placement_json(sys_case, result, config));
  write_file(dir / "allocation.csv", allocation_csv(sys_case, result));
  write_trajectories(dir, "before_", sys_case, before);
  write_trajectories(dir, "after_", sys_case, result.metrics);
  std::cout << table.to_text();
  std::cout << "termination: " << termination_name(result.termination)
            << ", total capacity " << result.total_capacity << "\n";

  if (verify) {
    const double err = cross_check(result.metrics, 101);
    std::cout << "verify: max modal/oracle mismatch " << err << "\n";
    if (err > 1e-6) {
      std::cerr << "verification failed: mismatch " << err << " exceeds 1e-6\n";
      return 3;
    }
  }
  return 0;
}

int cmd_fit_capability(const std::string& measurements, int synthetic, unsigned seed,
                       const std::string& norm, double h, double coverage, double p_bar,
                       int grid, const std::string& out_dir, bool verify) {
  MeasurementSet data;
  if (!measurements.empty())
    data = load_measurements_file(measurements);
  else if (synthetic > 0)
    data = synthetic_cloud(synthetic, seed);
  else
    throw InputError("fit-capability needs --measurements or --synthetic");

  const CapabilityBall ball = fit_norm_ball(data, norm_from_string(norm), h, coverage);
  const GainConstraint constraint = dual_constraint(ball, p_bar);
  const DualityReport report = verify_duality(constraint, ball, p_bar, grid);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_file(dir / "capability.json", capability_json(ball, constraint, report, p_bar));
  std::cout << "ball: p=" << norm_name(ball.p) << " h=" << ball.h << " c=" << ball.c
            << (ball.floored ? " (floored)" : "") << "\n"
            << "constraint: q=" << norm_name(constraint.q)
            << " bound=" << constraint.bound << "\n"
            << "duality: max power " << report.max_power << ", worst rel err "
            << report.worst_rel_err << "\n";
  if (verify && !(report.tight && report.inflated_violates)) {
    std::cerr << "verification failed: duality check not tight at rel err "
              << report.worst_rel_err << "\n";
    return 3;
  }
  return 0;
}

int cmd_verify(const std::string& case_path, const std::string& gains_path) {
  const PowerSystemCase sys_case = load_case_file(case_path);
  const DeviceGains gains = gains_path.empty()
                                ? DeviceGains::from_case(sys_case)
                                : load_gains_file(gains_path, sys_case);
  const MetricBundle bundle = evaluate(sys_case, gains);
  const double err = cross_check(bundle, 201);
  std::cout << "max modal/oracle mismatch: " << err << "\n";
  if (err > 1e-6) {
    std::cerr << "verification failed: mismatch exceeds 1e-6\n";
    return 3;
  }
  std::cout << "verification passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-response analysis and synthetic inertia placement for "
               "low-inertia power grids"};
  app.require_subcommand(1);

  std::string case_path, config_path, gains_path, measurements, out_dir = ".";
  std::string norm = "2";
  bool verify = false;
  unsigned seed = 0;
  int synthetic = 0, grid = 10000;
  double h_scale = 1.0, coverage = 1.0, p_bar = 1.0;

  CLI::App* analyze = app.add_subcommand("analyze", "Metrics and trajectories of a case");
  analyze->add_option("--case", case_path, "case JSON file")->required();
  analyze->add_option("--gains", gains_path, "device gains JSON file");
  analyze->add_option("--out-dir", out_dir, "output directory");
  analyze->add_flag("--verify", verify, "cross-check against the integration oracle");

  CLI::App* place_cmd = app.add_subcommand("place", "Optimize device gains");
  place_cmd->add_option("--case", case_path, "case JSON file")->required();
  place_cmd->add_option("--config", config_path, "placement config JSON file")->required();
  place_cmd->add_option("--out-dir", out_dir, "output directory");
  place_cmd->add_flag("--verify", verify, "cross-check against the integration oracle");

  CLI::App* fit = app.add_subcommand("fit-capability", "Fit a capability ball and its dual");
  fit->add_option("--measurements", measurements, "measurement CSV file");
  fit->add_option("--synthetic", synthetic, "generate this many synthetic samples");
  fit->add_option("--seed", seed, "seed for synthetic data");
  fit->add_option("--norm", norm, "ball order: 1, 2 or inf");
  fit->add_option("--h-scale", h_scale, "frequency scaling h");
  fit->add_option("--coverage", coverage, "sample coverage in (0, 1]");
  fit->add_option("--capacity", p_bar, "device power capacity P");
  fit->add_option("--grid", grid, "duality verification grid resolution");
  fit->add_option("--out-dir", out_dir, "output directory");
  fit->add_flag("--verify", verify, "fail unless the duality check is tight");

  CLI::App* verify_cmd = app.add_subcommand("verify", "Modal response vs integration oracle");
  verify_cmd->add_option("--case", case_path, "case JSON file")->required();
  verify_cmd->add_option("--gains", gains_path, "device gains JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(case_path, gains_path, out_dir, verify);
    if (place_cmd->parsed()) return cmd_place(case_path, config_path, out_dir, verify);
    if (fit->parsed())
      return cmd_fit_capability(measurements, synthetic, seed, norm, h_scale, coverage,
                                p_bar, grid, out_dir, verify);
    if (verify_cmd->parsed()) return cmd_verify(case_path, gains_path);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
