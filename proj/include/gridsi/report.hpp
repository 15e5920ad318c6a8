#pragma once

#include <string>
#include <vector>

#include "gridsi/capability.hpp"
#include "gridsi/placement.hpp"

namespace gridsi {

// One scenario line of the comparison table. Damping in percent, RoCoF in
// mHz/s, overshoot in mHz, gain sums in per unit.
struct ReportRow {
  std::string scenario;
  double zeta_min_pct = 0.0;
  double rocof_inf_mhz_s = 0.0;
  double overshoot_inf_mhz = 0.0;
  double sum_m_pu = 0.0;
  double sum_k_pu = 0.0;
  double rocof_avg_mhz_s = 0.0;
  double overshoot_avg_mhz = 0.0;
};

struct ReportTable {
  std::vector<ReportRow> rows;

  void add(const std::string& scenario, const MetricBundle& bundle,
           const DeviceGains& gains);
  std::string to_csv() const;
  std::string to_text() const;
};

// Machine-readable documents; all floats at full round-trip precision with a
// fixed key order, so identical inputs produce byte-identical files.
std::string metrics_json(const PowerSystemCase& sys_case, const MetricBundle& bundle,
                         const DeviceGains& gains);
std::string placement_json(const PowerSystemCase& sys_case, const PlacementResult& result,
                           const PlacementConfig& config);
std::string capability_json(const CapabilityBall& ball, const GainConstraint& constraint,
                            const DualityReport& report, double p_bar);

std::string allocation_csv(const PowerSystemCase& sys_case, const PlacementResult& result);

// Sampled pair response: columns time_s, freq_dev_hz, rocof_hz_s.
std::string trajectory_csv(const std::vector<double>& times, const std::vector<double>& y_hz,
                           const std::vector<double>& yd_hz_s);

}  // namespace gridsi
