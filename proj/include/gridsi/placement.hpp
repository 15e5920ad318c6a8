#pragma once

#include <map>
#include <string>
#include <vector>

#include "gridsi/capability.hpp"
#include "gridsi/netmodel.hpp"
#include "gridsi/response.hpp"
#include "gridsi/simplex.hpp"
#include "gridsi/spectral.hpp"

namespace gridsi {

// Per-device actuation limit: the dual-norm ball parameters together with the
// power capacity that scales it.
struct CapabilitySpec {
  NormOrder p = NormOrder::One;
  double h = 1.0;
  double c = 1.0;
  double capacity = 1.0;  // P_bar; fixed, or the starting value when variable

  GainConstraint constraint() const;
  // c * ||(K/h, M)||_q: the capacity a gain pair actually occupies.
  double usage(double m_gain, double k_gain) const;
};

enum class CapacityMode { Fixed, Budget, Variable };

struct PlacementConfig {
  // Objective weights. zeta/rocof/overshoot act on the worst case (zeta_min,
  // R_inf, S_inf); the _avg weights act on mean |value| over all pairs.
  double w_zeta = 0.0;
  double w_rocof = 0.0;
  double w_overshoot = 0.0;
  double w_rocof_avg = 0.0;
  double w_overshoot_avg = 0.0;
  double w_capacity = 0.0;  // cost per unit of placed capacity (variable mode)

  // Hard metric bounds; infinities disable them. RoCoF in Hz/s, overshoot in
  // Hz, both on signed extremum values.
  double zeta_lo = -std::numeric_limits<double>::infinity();
  double rocof_lo = -std::numeric_limits<double>::infinity();
  double rocof_hi = std::numeric_limits<double>::infinity();
  double overshoot_lo = -std::numeric_limits<double>::infinity();
  double overshoot_hi = std::numeric_limits<double>::infinity();

  double pen_zeta = 1e4;
  double pen_rocof = 1e4;
  double pen_overshoot = 1e4;

  CapacityMode mode = CapacityMode::Fixed;
  double budget = std::numeric_limits<double>::infinity();

  double trust_initial = 0.0;          // absolute initial step bound; 0 = use fraction
  double trust_initial_fraction = 0.1;  // of each parameter's capability extent
  double trust_floor = 1e-6;

  int max_iterations = 200;
  double improvement_threshold = 1e-6;

  CapabilitySpec default_capability;
  bool has_default_capability = false;
  std::map<std::string, CapabilitySpec> device_capability;

  CapabilitySpec capability_for(const Device& dev) const;
  void validate() const;
};

PlacementConfig load_placement_config(const std::string& text);
PlacementConfig load_placement_config_file(const std::string& path);

// Everything one iterate needs to know about the closed-loop system: metric
// values, their parameter sensitivities, and the extremum times used to seed
// the next search. Frequencies in Hz, RoCoF in Hz/s.
struct MetricBundle {
  LinearSystem sys;
  ModalData modal;
  ResidueSet res;

  std::vector<int> osc_modes;  // indices into modal with Im > 0
  std::vector<double> zeta;    // per oscillatory mode
  double zeta_min = 1.0;

  Mat overshoot, rocof;        // m x d, signed
  Mat t_overshoot, t_rocof;    // extremum times
  MatU8 b_overshoot, b_rocof;  // boundary flags

  Mat dzeta;       // n_params x n_osc
  Mat dovershoot;  // n_params x (m*d), pair index o*d + j
  Mat drocof;

  double overshoot_inf = 0.0, rocof_inf = 0.0;
  double overshoot_avg = 0.0, rocof_avg = 0.0;

  int m = 0, d = 0;
  std::vector<std::string> param_ids;
};

struct SensitivitySweep {
  Mat dzeta;
  Mat dovershoot;
  Mat drocof;
};

// Per-parameter eigenvalue/residue/extremum sensitivities; the data-parallel
// kernel the benchmark exercises.
SensitivitySweep sensitivity_sweep(const LinearSystem& sys, const ModalData& modal,
                                   const ResidueSet& res, const ExtremaField& peaks_s,
                                   const ExtremaField& peaks_r,
                                   const std::vector<int>& osc_modes, ExecMode exec);

MetricBundle evaluate(const PowerSystemCase& sys_case, const DeviceGains& gains,
                      ExecMode exec = ExecMode::Parallel,
                      const MetricBundle* seed = nullptr);

// The scalar the optimizer descends: weighted metrics plus capacity cost plus
// slack-penalty-weighted hard-bound violations.
double true_objective(const MetricBundle& bundle, const PlacementConfig& config,
                      const std::vector<double>& capacities);

struct LinearProgramInfo {
  lp::Problem prob;
  std::vector<std::string> var_names;
  int n_params = 0;
  int n_caps = 0;
  int col_zeta_min = -1, col_rocof_inf = -1, col_overshoot_inf = -1;
  int first_slack = -1;
  // LP objective + const_offset predicts the true objective after the step.
  double const_offset = 0.0;
};

LinearProgramInfo build_lp(const MetricBundle& bundle, const PlacementConfig& config,
                           const Vec& gains, const Vec& trust,
                           const std::vector<CapabilitySpec>& caps);

struct IterateRecord {
  int iteration = 0;
  Vec gains;
  double objective = 0.0;
  double zeta_min = 0.0, rocof_inf = 0.0, overshoot_inf = 0.0;
  double rocof_avg = 0.0, overshoot_avg = 0.0;
  double trust_max = 0.0;
  bool accepted = true;
};

enum class Termination { MaxIterations, ImprovementThreshold, StepSizeFloor };

std::string termination_name(Termination t);

struct PlacementResult {
  DeviceGains gains;
  MetricBundle metrics;
  std::vector<IterateRecord> history;
  Termination termination = Termination::MaxIterations;
  std::vector<double> capacities;  // per device
  double total_capacity = 0.0;
  double objective = 0.0;
  // Residual hard-bound violations at the final iterate (0 when feasible).
  double zeta_violation = 0.0, rocof_violation = 0.0, overshoot_violation = 0.0;
};

PlacementResult place(const PowerSystemCase& sys_case, const PlacementConfig& config,
                      ExecMode exec = ExecMode::Parallel);

// Variable-capacity planning: minimize total placed capacity subject to the
// configured hard metric bounds.
PlacementResult min_capacity_place(const PowerSystemCase& sys_case,
                                   const PlacementConfig& config,
                                   ExecMode exec = ExecMode::Parallel);

}  // namespace gridsi
