#include "gridsi/report.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace gridsi {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string fmt9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

ordered_json summary_json(const MetricBundle& bundle, const DeviceGains& gains) {
  ordered_json s;
  s["zeta_min_pct"] = bundle.zeta_min * 100.0;
  s["rocof_inf_mhz_s"] = bundle.rocof_inf * 1000.0;
  s["overshoot_inf_mhz"] = bundle.overshoot_inf * 1000.0;
  s["rocof_avg_mhz_s"] = bundle.rocof_avg * 1000.0;
  s["overshoot_avg_mhz"] = bundle.overshoot_avg * 1000.0;
  s["sum_m_pu"] = std::accumulate(gains.inertia.begin(), gains.inertia.end(), 0.0);
  s["sum_k_pu"] = std::accumulate(gains.damping.begin(), gains.damping.end(), 0.0);
  return s;
}

ordered_json matrix_json(const Mat& m) {
  ordered_json rows = ordered_json::array();
  for (int i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void ReportTable::add(const std::string& scenario, const MetricBundle& bundle,
                      const DeviceGains& gains) {
  ReportRow r;
  r.scenario = scenario;
  r.zeta_min_pct = bundle.zeta_min * 100.0;
  r.rocof_inf_mhz_s = bundle.rocof_inf * 1000.0;
  r.overshoot_inf_mhz = bundle.overshoot_inf * 1000.0;
  r.sum_m_pu = std::accumulate(gains.inertia.begin(), gains.inertia.end(), 0.0);
  r.sum_k_pu = std::accumulate(gains.damping.begin(), gains.damping.end(), 0.0);
  r.rocof_avg_mhz_s = bundle.rocof_avg * 1000.0;
  r.overshoot_avg_mhz = bundle.overshoot_avg * 1000.0;
  rows.push_back(std::move(r));
}

std::string ReportTable::to_csv() const {
  std::ostringstream out;
  out << "scenario,zeta_min_pct,rocof_inf_mhz_s,overshoot_inf_mhz,"
         "sum_m_pu,sum_k_pu,rocof_avg_mhz_s,overshoot_avg_mhz\n";
  for (const ReportRow& r : rows)
    out << r.scenario << ',' << fmt6(r.zeta_min_pct) << ',' << fmt6(r.rocof_inf_mhz_s)
        << ',' << fmt6(r.overshoot_inf_mhz) << ',' << fmt6(r.sum_m_pu) << ','
        << fmt6(r.sum_k_pu) << ',' << fmt6(r.rocof_avg_mhz_s) << ','
        << fmt6(r.overshoot_avg_mhz) << '\n';
  return out.str();
}

std::string ReportTable::to_text() const {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-18s %11s %12s %11s %10s %10s %11s %10s\n",
                "scenario", "zeta_min_%", "R_inf_mHz/s", "S_inf_mHz", "sum_M_pu",
                "sum_K_pu", "R1_mHz/s", "S1_mHz");
  out << line;
  for (const ReportRow& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%-18s %11.6g %12.6g %11.6g %10.6g %10.6g %11.6g %10.6g\n",
                  r.scenario.c_str(), r.zeta_min_pct, r.rocof_inf_mhz_s,
                  r.overshoot_inf_mhz, r.sum_m_pu, r.sum_k_pu, r.rocof_avg_mhz_s,
                  r.overshoot_avg_mhz);
    out << line;
  }
  return out.str();
}

std::string metrics_json(const PowerSystemCase& sys_case, const MetricBundle& bundle,
                         const DeviceGains& gains) {
  ordered_json doc;
  doc["case"] = {{"buses", sys_case.buses.size()},
                 {"devices", sys_case.devices.size()},
                 {"disturbances", sys_case.disturbances.size()},
                 {"outputs", sys_case.outputs.size()}};
  ordered_json g;
  for (std::size_t v = 0; v < sys_case.devices.size(); ++v)
    g[sys_case.devices[v].id] = {{"inertia", gains.inertia[v]},
                                 {"damping", gains.damping[v]}};
  doc["gains"] = std::move(g);

  ordered_json eig = ordered_json::array();
  for (int i = 0; i < bundle.modal.n(); ++i)
    eig.push_back({bundle.modal.eigenvalues[i].real(), bundle.modal.eigenvalues[i].imag()});
  doc["eigenvalues"] = std::move(eig);
  doc["damping"] = {{"zeta_min", bundle.zeta_min},
                    {"zeta", bundle.zeta},
                    {"modes", bundle.osc_modes}};
  doc["outputs"] = sys_case.outputs;
  ordered_json dist = ordered_json::array();
  for (const Disturbance& d : sys_case.disturbances) dist.push_back(d.bus);
  doc["disturbances"] = std::move(dist);
  doc["overshoot_hz"] = matrix_json(bundle.overshoot);
  doc["overshoot_time_s"] = matrix_json(bundle.t_overshoot);
  doc["rocof_hz_s"] = matrix_json(bundle.rocof);
  doc["rocof_time_s"] = matrix_json(bundle.t_rocof);
  doc["summary"] = summary_json(bundle, gains);
  return doc.dump(2) + "\n";
}

std::string placement_json(const PowerSystemCase& sys_case, const PlacementResult& result,
                           const PlacementConfig& config) {
  ordered_json doc;
  doc["termination"] = termination_name(result.termination);
  doc["objective"] = result.objective;
  doc["iterations"] = result.history.empty() ? 0 : result.history.back().iteration;

  ordered_json hist = ordered_json::array();
  for (const IterateRecord& rec : result.history) {
    ordered_json h;
    h["iteration"] = rec.iteration;
    h["accepted"] = rec.accepted;
    h["objective"] = rec.objective;
    h["zeta_min"] = rec.zeta_min;
    h["rocof_inf_hz_s"] = rec.rocof_inf;
    h["overshoot_inf_hz"] = rec.overshoot_inf;
    h["rocof_avg_hz_s"] = rec.rocof_avg;
    h["overshoot_avg_hz"] = rec.overshoot_avg;
    h["trust_max"] = rec.trust_max;
    std::vector<double> g(rec.gains.data(), rec.gains.data() + rec.gains.size());
    h["gains"] = std::move(g);
    hist.push_back(std::move(h));
  }
  doc["history"] = std::move(hist);

  ordered_json alloc;
  for (std::size_t v = 0; v < sys_case.devices.size(); ++v) {
    const Device& dev = sys_case.devices[v];
    alloc[dev.id] = {{"bus", dev.bus},
                     {"inertia", result.gains.inertia[v]},
                     {"damping", result.gains.damping[v]},
                     {"capacity", result.capacities[v]}};
  }
  doc["allocation"] = std::move(alloc);
  doc["total_capacity"] = result.total_capacity;
  doc["violations"] = {{"zeta", result.zeta_violation},
                       {"rocof_hz_s", result.rocof_violation},
                       {"overshoot_hz", result.overshoot_violation}};
  doc["metrics"] = summary_json(result.metrics, result.gains);
  doc["config"] = {{"capacity_mode", config.mode == CapacityMode::Fixed      ? "fixed"
                                     : config.mode == CapacityMode::Budget   ? "budget"
                                                                             : "variable"},
                   {"max_iterations", config.max_iterations},
                   {"improvement_threshold", config.improvement_threshold}};
  return doc.dump(2) + "\n";
}

std::string capability_json(const CapabilityBall& ball, const GainConstraint& constraint,
                            const DualityReport& report, double p_bar) {
  ordered_json doc;
  doc["ball"] = {{"p", norm_name(ball.p)},
                 {"h", ball.h},
                 {"c", ball.c},
                 {"coverage", ball.coverage},
                 {"floored", ball.floored}};
  doc["constraint"] = {{"q", norm_name(constraint.q)},
                       {"h", constraint.h},
                       {"bound", constraint.bound}};
  doc["p_bar"] = p_bar;
  doc["verification"] = {{"max_power", report.max_power},
                         {"worst_rel_err", report.worst_rel_err},
                         {"tight", report.tight},
                         {"inflated_violates", report.inflated_violates}};
  return doc.dump(2) + "\n";
}

std::string allocation_csv(const PowerSystemCase& sys_case, const PlacementResult& result) {
  std::ostringstream out;
  out << "device,bus,inertia_gain,damping_gain,capacity\n";
  for (std::size_t v = 0; v < sys_case.devices.size(); ++v) {
    const Device& dev = sys_case.devices[v];
    out << dev.id << ',' << dev.bus << ',' << fmt9(result.gains.inertia[v]) << ','
        << fmt9(result.gains.damping[v]) << ',' << fmt9(result.capacities[v]) << '\n';
  }
  return out.str();
}

std::string trajectory_csv(const std::vector<double>& times, const std::vector<double>& y_hz,
                           const std::vector<double>& yd_hz_s) {
  std::ostringstream out;
  out << "time_s,freq_dev_hz,rocof_hz_s\n";
  for (std::size_t i = 0; i < times.size(); ++i)
    out << fmt9(times[i]) << ',' << fmt9(y_hz[i]) << ',' << fmt9(yd_hz_s[i]) << '\n';
  return out.str();
}

}  // namespace gridsi
