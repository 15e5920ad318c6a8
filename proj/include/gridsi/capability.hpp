#pragma once

#include <string>
#include <vector>

#include "gridsi/exec.hpp"
#include "gridsi/types.hpp"

namespace gridsi {

// Frequency-deviation / RoCoF sample cloud used to size device capability.
struct MeasurementSet {
  std::vector<double> time;   // s
  std::vector<double> omega;  // frequency deviation, Hz
  std::vector<double> rocof;  // Hz/s

  int size() const { return static_cast<int>(omega.size()); }
};

enum class NormOrder { One, Two, Inf };

std::string norm_name(NormOrder p);
NormOrder norm_from_string(const std::string& s);

// Scaled p-norm ball ((h|w|)^p + |wdot|^p)^(1/p) <= c covering the requested
// fraction of the measurement cloud.
struct CapabilityBall {
  NormOrder p = NormOrder::One;
  double h = 1.0;       // frequency scaling, 1/s
  double c = 0.0;       // ball radius
  double coverage = 1.0;
  bool floored = false;  // radius hit the degenerate-cloud floor
};

// Dual-norm bound on the gains: ||(K/h, M)||_q <= bound. For q = inf this is
// the box K/h <= bound, M <= bound; for q = 1 the halfplane K/h + M <= bound.
struct GainConstraint {
  NormOrder q = NormOrder::Inf;
  double h = 1.0;
  double bound = 0.0;  // P_bar / c

  // ||(K/h, M)||_q for this constraint's dual order.
  double gain_norm(double m_gain, double k_gain) const;
  bool contains(double m_gain, double k_gain, double tol = 0.0) const;
};

struct DualityReport {
  double max_power = 0.0;        // sup |K w + M wdot| over ball x dual boundary
  double worst_rel_err = 0.0;    // |max_power - P_bar| / P_bar over dual points
  bool tight = false;            // every dual boundary point attains P_bar
  bool inflated_violates = false;  // 1.01-scaled gains exceed P_bar somewhere
};

// Parse "time_s,freq_dev_hz[,rocof_hz_s]" CSV text. Without a RoCoF column it
// is reconstructed by central differences (one-sided at the ends).
MeasurementSet load_measurements(const std::string& text);
MeasurementSet load_measurements_file(const std::string& path);

CapabilityBall fit_norm_ball(const MeasurementSet& data, NormOrder p, double h,
                             double coverage, double c_floor = 1e-9);

GainConstraint dual_constraint(const CapabilityBall& ball, double p_bar);

DualityReport verify_duality(const GainConstraint& constraint, const CapabilityBall& ball,
                             double p_bar, int grid, ExecMode exec = ExecMode::Parallel);

}  // namespace gridsi
