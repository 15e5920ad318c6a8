#include "gridsi/placement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"

namespace gridsi {

namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kToHz = 1.0 / (2.0 * kPi);

double get_num(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number())
    throw InputError("config: field '" + key + "' must be a number");
  return j[key].get<double>();
}

NormOrder parse_norm(const json& j) {
  if (j.is_string()) return norm_from_string(j.get<std::string>());
  if (j.is_number()) {
    const double v = j.get<double>();
    if (v == 1.0) return NormOrder::One;
    if (v == 2.0) return NormOrder::Two;
  }
  throw InputError("config: capability order p must be 1, 2 or \"inf\"");
}

CapabilitySpec parse_spec(const json& j, const CapabilitySpec& base) {
  CapabilitySpec s = base;
  if (j.contains("p")) s.p = parse_norm(j["p"]);
  s.h = get_num(j, "h", s.h);
  s.c = get_num(j, "c", s.c);
  s.capacity = get_num(j, "capacity", s.capacity);
  if (!(s.h > 0.0)) throw InputError("config: capability h must be positive");
  if (!(s.c > 0.0)) throw InputError("config: capability c must be positive");
  if (s.capacity < 0.0) throw InputError("config: capability capacity must be nonnegative");
  return s;
}

}  // namespace

GainConstraint CapabilitySpec::constraint() const {
  CapabilityBall ball;
  ball.p = p;
  ball.h = h;
  ball.c = c;
  return dual_constraint(ball, capacity > 0.0 ? capacity : 1.0);
}

double CapabilitySpec::usage(double m_gain, double k_gain) const {
  GainConstraint gc;
  gc.q = constraint().q;
  gc.h = h;
  return c * gc.gain_norm(m_gain, k_gain);
}

CapabilitySpec PlacementConfig::capability_for(const Device& dev) const {
  const auto it = device_capability.find(dev.id);
  if (it != device_capability.end()) return it->second;
  if (has_default_capability) return default_capability;
  CapabilitySpec s;
  s.capacity = dev.capacity > 0.0 ? dev.capacity : 1.0;
  return s;
}

void PlacementConfig::validate() const {
  const double weights[] = {w_zeta, w_rocof, w_overshoot, w_rocof_avg, w_overshoot_avg,
                            w_capacity};
  double wmax = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw InputError("config: cost weights must be nonnegative");
    wmax = std::max(wmax, w);
  }
  if (wmax <= 0.0) throw InputError("config: at least one cost weight must be positive");
  if (rocof_lo > rocof_hi) throw InputError("config: rocof_lo exceeds rocof_hi");
  if (overshoot_lo > overshoot_hi)
    throw InputError("config: overshoot_lo exceeds overshoot_hi");
  for (double pen : {pen_zeta, pen_rocof, pen_overshoot})
    if (!(pen >= 10.0 * wmax) || !(pen > 0.0))
      throw InputError("config: slack penalties must dominate the cost weights "
                       "(at least 10x the largest weight)");
  if (trust_initial < 0.0 || (trust_initial == 0.0 && !(trust_initial_fraction > 0.0)))
    throw InputError("config: trust region initial size must be positive");
  if (!(trust_floor > 0.0)) throw InputError("config: trust floor must be positive");
  if (max_iterations < 1) throw InputError("config: max_iterations must be at least 1");
  if (improvement_threshold < 0.0)
    throw InputError("config: improvement_threshold must be nonnegative");
  if (mode == CapacityMode::Budget && !(std::isfinite(budget) && budget >= 0.0))
    throw InputError("config: budget mode requires a finite nonnegative budget");
  if (mode == CapacityMode::Variable && !(w_capacity > 0.0))
    throw InputError("config: variable-capacity mode requires a positive capacity weight");
}

PlacementConfig load_placement_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw InputError("config: top level must be an object");

  PlacementConfig cfg;
  if (j.contains("weights")) {
    const json& w = j["weights"];
    cfg.w_zeta = get_num(w, "zeta", 0.0);
    cfg.w_rocof = get_num(w, "rocof_inf", 0.0);
    cfg.w_overshoot = get_num(w, "overshoot_inf", 0.0);
    cfg.w_rocof_avg = get_num(w, "rocof_avg", 0.0);
    cfg.w_overshoot_avg = get_num(w, "overshoot_avg", 0.0);
    cfg.w_capacity = get_num(w, "capacity", 0.0);
  }
  if (j.contains("bounds")) {
    const json& b = j["bounds"];
    cfg.zeta_lo = get_num(b, "zeta_lo", -kInf);
    cfg.rocof_lo = get_num(b, "rocof_lo", -kInf);
    cfg.rocof_hi = get_num(b, "rocof_hi", kInf);
    cfg.overshoot_lo = get_num(b, "overshoot_lo", -kInf);
    cfg.overshoot_hi = get_num(b, "overshoot_hi", kInf);
  }
  if (j.contains("slack_penalty")) {
    const json& s = j["slack_penalty"];
    cfg.pen_zeta = get_num(s, "zeta", cfg.pen_zeta);
    cfg.pen_rocof = get_num(s, "rocof", cfg.pen_rocof);
    cfg.pen_overshoot = get_num(s, "overshoot", cfg.pen_overshoot);
  }
  if (j.contains("capacity_mode")) {
    const std::string m = j["capacity_mode"].get<std::string>();
    if (m == "fixed")
      cfg.mode = CapacityMode::Fixed;
    else if (m == "budget")
      cfg.mode = CapacityMode::Budget;
    else if (m == "variable")
      cfg.mode = CapacityMode::Variable;
    else
      throw InputError("config: capacity_mode must be fixed, budget or variable");
  }
  cfg.budget = get_num(j, "budget", cfg.budget);
  if (j.contains("trust")) {
    const json& t = j["trust"];
    cfg.trust_initial = get_num(t, "initial", 0.0);
    cfg.trust_initial_fraction = get_num(t, "initial_fraction", cfg.trust_initial_fraction);
    cfg.trust_floor = get_num(t, "floor", cfg.trust_floor);
  }
  if (j.contains("stopping")) {
    const json& s = j["stopping"];
    cfg.max_iterations = static_cast<int>(get_num(s, "max_iterations", cfg.max_iterations));
    cfg.improvement_threshold =
        get_num(s, "improvement_threshold", cfg.improvement_threshold);
  }
  if (j.contains("capability")) {
    const json& c = j["capability"];
    if (c.contains("default")) {
      cfg.default_capability = parse_spec(c["default"], CapabilitySpec{});
      cfg.has_default_capability = true;
    }
    if (c.contains("devices")) {
      const CapabilitySpec base =
          cfg.has_default_capability ? cfg.default_capability : CapabilitySpec{};
      for (const auto& [id, spec] : c["devices"].items())
        cfg.device_capability[id] = parse_spec(spec, base);
    }
  }
  return cfg;
}

PlacementConfig load_placement_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_placement_config(ss.str());
}

SensitivitySweep sensitivity_sweep(const LinearSystem& sys, const ModalData& modal,
                                   const ResidueSet& res, const ExtremaField& peaks_s,
                                   const ExtremaField& peaks_r,
                                   const std::vector<int>& osc_modes, ExecMode exec) {
  const int n_params = static_cast<int>(sys.params.size());
  const int n_osc = static_cast<int>(osc_modes.size());
  const int md = res.m * res.d;

  SensitivitySweep sw;
  sw.dzeta = Mat::Zero(n_params, n_osc);
  sw.dovershoot = Mat::Zero(n_params, md);
  sw.drocof = Mat::Zero(n_params, md);

  std::exception_ptr failure;
  std::mutex failure_mutex;
  parallel_for(n_params, exec, [&](int p) {
    try {
      const ParamInfo& info = sys.params[p];
      const std::vector<SparseEntry> dA = {{info.row, info.col, info.value}};
      const ResidueSensitivity rs = residue_sensitivity(modal, res, sys.B, sys.C, dA);
      for (int jj = 0; jj < n_osc; ++jj)
        sw.dzeta(p, jj) =
            damping_sensitivity(modal.eigenvalues[osc_modes[jj]], rs.dlambda[osc_modes[jj]]);
      const Mat ds = overshoot_sensitivity(res, rs, peaks_s);
      const Mat dr = rocof_sensitivity(res, rs, peaks_r);
      for (int o = 0; o < res.m; ++o)
        for (int q = 0; q < res.d; ++q) {
          sw.dovershoot(p, o * res.d + q) = ds(o, q) * kToHz;
          sw.drocof(p, o * res.d + q) = dr(o, q) * kToHz;
        }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  });
  if (failure) std::rethrow_exception(failure);
  return sw;
}

MetricBundle evaluate(const PowerSystemCase& sys_case, const DeviceGains& gains,
                      ExecMode exec, const MetricBundle* seed) {
  MetricBundle b;
  b.sys = attach_devices(build_base_system(sys_case), sys_case, gains);
  b.modal = eigensolve(b.sys.A);
  b.res = residues(b.modal, b.sys.B, b.sys.C);
  b.m = b.res.m;
  b.d = b.res.d;

  SearchOptions opt;
  const bool seed_ok = seed && seed->t_overshoot.rows() == b.m && seed->t_overshoot.cols() == b.d;
  const ExtremaField peaks_s =
      find_overshoot(b.res, opt, seed_ok ? &seed->t_overshoot : nullptr, exec);
  const ExtremaField peaks_r =
      find_rocof(b.res, opt, seed_ok ? &seed->t_rocof : nullptr, exec);

  b.overshoot = peaks_s.value * kToHz;
  b.rocof = peaks_r.value * kToHz;
  b.t_overshoot = peaks_s.time;
  b.t_rocof = peaks_r.time;
  b.b_overshoot = peaks_s.boundary;
  b.b_rocof = peaks_r.boundary;

  for (int i = 0; i < b.modal.n(); ++i)
    if (b.modal.oscillatory(i)) {
      b.osc_modes.push_back(i);
      b.zeta.push_back(damping_ratio(b.modal.eigenvalues[i]));
    }
  b.zeta_min = 1.0;
  for (double z : b.zeta) b.zeta_min = std::min(b.zeta_min, z);

  const int md = b.m * b.d;
  if (md > 0) {
    b.overshoot_inf = b.overshoot.cwiseAbs().maxCoeff();
    b.rocof_inf = b.rocof.cwiseAbs().maxCoeff();
    b.overshoot_avg = b.overshoot.cwiseAbs().sum() / md;
    b.rocof_avg = b.rocof.cwiseAbs().sum() / md;
  }

  const SensitivitySweep sw =
      sensitivity_sweep(b.sys, b.modal, b.res, peaks_s, peaks_r, b.osc_modes, exec);
  b.dzeta = sw.dzeta;
  b.dovershoot = sw.dovershoot;
  b.drocof = sw.drocof;

  for (const ParamInfo& p : b.sys.params) b.param_ids.push_back(p.id);
  return b;
}

double true_objective(const MetricBundle& bundle, const PlacementConfig& config,
                      const std::vector<double>& capacities) {
  double obj = -config.w_zeta * bundle.zeta_min + config.w_rocof * bundle.rocof_inf +
               config.w_overshoot * bundle.overshoot_inf +
               config.w_rocof_avg * bundle.rocof_avg +
               config.w_overshoot_avg * bundle.overshoot_avg;
  if (config.mode == CapacityMode::Variable)
    for (double c : capacities) obj += config.w_capacity * c;

  if (std::isfinite(config.zeta_lo))
    for (double z : bundle.zeta) obj += config.pen_zeta * std::max(0.0, config.zeta_lo - z);
  for (int o = 0; o < bundle.m; ++o)
    for (int j = 0; j < bundle.d; ++j) {
      const double r = bundle.rocof(o, j), s = bundle.overshoot(o, j);
      if (std::isfinite(config.rocof_hi))
        obj += config.pen_rocof * std::max(0.0, r - config.rocof_hi);
      if (std::isfinite(config.rocof_lo))
        obj += config.pen_rocof * std::max(0.0, config.rocof_lo - r);
      if (std::isfinite(config.overshoot_hi))
        obj += config.pen_overshoot * std::max(0.0, s - config.overshoot_hi);
      if (std::isfinite(config.overshoot_lo))
        obj += config.pen_overshoot * std::max(0.0, config.overshoot_lo - s);
    }
  return obj;
}

LinearProgramInfo build_lp(const MetricBundle& bundle, const PlacementConfig& config,
                           const Vec& gains, const Vec& trust,
                           const std::vector<CapabilitySpec>& caps) {
  const int n_params = static_cast<int>(bundle.param_ids.size());
  if (n_params == 0) throw InputError("placement requires at least one device parameter");
  const int n_dev = static_cast<int>(caps.size());
  const int md = bundle.m * bundle.d;

  LinearProgramInfo info;
  info.n_params = n_params;
  info.n_caps = config.mode == CapacityMode::Fixed ? 0 : n_dev;

  std::vector<double> cost, lo, hi;
  auto add_var = [&](const std::string& name, double c, double l, double u) {
    info.var_names.push_back(name);
    cost.push_back(c);
    lo.push_back(l);
    hi.push_back(u);
    return static_cast<int>(cost.size()) - 1;
  };
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<double> rhs;
  auto add_row = [&](std::vector<std::pair<int, double>> coeffs, double b) {
    rows.push_back(std::move(coeffs));
    rhs.push_back(b);
  };

  // Step variables, with the average-performance terms as their direct cost.
  for (int p = 0; p < n_params; ++p) {
    double c = 0.0;
    if (md > 0 && (config.w_rocof_avg > 0.0 || config.w_overshoot_avg > 0.0)) {
      for (int ij = 0; ij < md; ++ij) {
        const double sr = bundle.rocof(ij / bundle.d, ij % bundle.d);
        const double ss = bundle.overshoot(ij / bundle.d, ij % bundle.d);
        c += config.w_rocof_avg / md * (sr > 0 ? 1.0 : (sr < 0 ? -1.0 : 0.0)) *
             bundle.drocof(p, ij);
        c += config.w_overshoot_avg / md * (ss > 0 ? 1.0 : (ss < 0 ? -1.0 : 0.0)) *
             bundle.dovershoot(p, ij);
      }
    }
    const int dev = p / 2;
    const bool is_inertia = (p % 2 == 0);
    double l = std::max(-trust[p], -gains[p]);
    double u = trust[p];
    // The box dual (p = 1) with fixed capacity is exactly a variable bound.
    if (config.mode == CapacityMode::Fixed && caps[dev].p == NormOrder::One) {
      const double extent = caps[dev].capacity / caps[dev].c;
      const double limit = is_inertia ? extent : caps[dev].h * extent;
      u = std::min(u, limit - gains[p]);
    }
    u = std::max(u, l);
    add_var("d:" + bundle.param_ids[p], c, l, u);
  }

  std::vector<int> cap_col(n_dev, -1);
  if (info.n_caps > 0)
    for (int v = 0; v < n_dev; ++v) {
      const std::string dev_id = bundle.param_ids[2 * v].substr(
          0, bundle.param_ids[2 * v].size() - 2);  // strip ".M"
      cap_col[v] = add_var("cap:" + dev_id,
                           config.mode == CapacityMode::Variable ? config.w_capacity : 0.0,
                           0.0, std::isfinite(config.budget) ? config.budget : kInf);
    }

  if (config.w_zeta > 0.0) info.col_zeta_min = add_var("zeta_min", -config.w_zeta, -2.0, 2.0);
  if (config.w_rocof > 0.0) info.col_rocof_inf = add_var("rocof_inf", config.w_rocof, 0.0, kInf);
  if (config.w_overshoot > 0.0)
    info.col_overshoot_inf = add_var("overshoot_inf", config.w_overshoot, 0.0, kInf);
  info.first_slack = static_cast<int>(cost.size());

  auto grad_row = [&](const Mat& dmetric, int ij, double sign) {
    std::vector<std::pair<int, double>> coeffs;
    coeffs.reserve(n_params + 2);
    for (int p = 0; p < n_params; ++p) coeffs.emplace_back(p, sign * dmetric(p, ij));
    return coeffs;
  };

  // Worst-case epigraphs: the variable dominates every predicted signed value.
  if (info.col_zeta_min >= 0)
    for (int jj = 0; jj < static_cast<int>(bundle.osc_modes.size()); ++jj) {
      auto coeffs = grad_row(bundle.dzeta, jj, -1.0);
      coeffs.emplace_back(info.col_zeta_min, 1.0);
      add_row(std::move(coeffs), bundle.zeta[jj]);
    }
  if (info.col_rocof_inf >= 0)
    for (int ij = 0; ij < md; ++ij) {
      const double r = bundle.rocof(ij / bundle.d, ij % bundle.d);
      auto up = grad_row(bundle.drocof, ij, 1.0);
      up.emplace_back(info.col_rocof_inf, -1.0);
      add_row(std::move(up), -r);
      auto dn = grad_row(bundle.drocof, ij, -1.0);
      dn.emplace_back(info.col_rocof_inf, -1.0);
      add_row(std::move(dn), r);
    }
  if (info.col_overshoot_inf >= 0)
    for (int ij = 0; ij < md; ++ij) {
      const double s = bundle.overshoot(ij / bundle.d, ij % bundle.d);
      auto up = grad_row(bundle.dovershoot, ij, 1.0);
      up.emplace_back(info.col_overshoot_inf, -1.0);
      add_row(std::move(up), -s);
      auto dn = grad_row(bundle.dovershoot, ij, -1.0);
      dn.emplace_back(info.col_overshoot_inf, -1.0);
      add_row(std::move(dn), s);
    }

  // Hard bounds with one nonnegative slack on each side that starts violated.
  if (std::isfinite(config.zeta_lo))
    for (int jj = 0; jj < static_cast<int>(bundle.osc_modes.size()); ++jj) {
      auto coeffs = grad_row(bundle.dzeta, jj, -1.0);
      if (bundle.zeta[jj] < config.zeta_lo) {
        const int s = add_var("slack:zeta:" + std::to_string(bundle.osc_modes[jj]),
                              config.pen_zeta, 0.0, kInf);
        coeffs.emplace_back(s, -1.0);
      }
      add_row(std::move(coeffs), bundle.zeta[jj] - config.zeta_lo);
    }
  auto bound_rows = [&](const Mat& value, const Mat& dmetric, double lo_bound,
                        double hi_bound, double penalty, const std::string& tag) {
    for (int ij = 0; ij < md; ++ij) {
      const double v = value(ij / bundle.d, ij % bundle.d);
      const std::string suffix =
          ":" + std::to_string(ij / bundle.d) + ":" + std::to_string(ij % bundle.d);
      if (std::isfinite(hi_bound)) {
        auto coeffs = grad_row(dmetric, ij, 1.0);
        if (v > hi_bound) {
          const int s = add_var("slack:" + tag + "_hi" + suffix, penalty, 0.0, kInf);
          coeffs.emplace_back(s, -1.0);
        }
        add_row(std::move(coeffs), hi_bound - v);
      }
      if (std::isfinite(lo_bound)) {
        auto coeffs = grad_row(dmetric, ij, -1.0);
        if (v < lo_bound) {
          const int s = add_var("slack:" + tag + "_lo" + suffix, penalty, 0.0, kInf);
          coeffs.emplace_back(s, -1.0);
        }
        add_row(std::move(coeffs), v - lo_bound);
      }
    }
  };
  bound_rows(bundle.rocof, bundle.drocof, config.rocof_lo, config.rocof_hi,
             config.pen_rocof, "rocof");
  bound_rows(bundle.overshoot, bundle.dovershoot, config.overshoot_lo, config.overshoot_hi,
             config.pen_overshoot, "overshoot");

  // Capability constraints: supporting half-planes of the dual-norm ball in
  // the (K/h, M) plane, tied to the capacity variable when there is one.
  for (int v = 0; v < n_dev; ++v) {
    const CapabilitySpec& cs = caps[v];
    const double gm = gains[2 * v], gk = gains[2 * v + 1];
    const auto q = cs.constraint().q;
    auto add_cap_row = [&](double a_k, double b_m) {
      // c * (a_k (gk + dK)/h + b_m (gm + dM)) <= capacity or cap var
      std::vector<std::pair<int, double>> coeffs;
      coeffs.emplace_back(2 * v + 1, cs.c * a_k / cs.h);
      coeffs.emplace_back(2 * v, cs.c * b_m);
      const double used = cs.c * (a_k * gk / cs.h + b_m * gm);
      if (config.mode == CapacityMode::Fixed) {
        add_row(std::move(coeffs), cs.capacity - used);
      } else {
        coeffs.emplace_back(cap_col[v], -1.0);
        add_row(std::move(coeffs), -used);
      }
    };
    if (q == NormOrder::One) {
      add_cap_row(1.0, 1.0);
    } else if (q == NormOrder::Two) {
      for (int t = 0; t < 16; ++t) {
        const double th = 0.5 * kPi * t / 15.0;
        add_cap_row(std::cos(th), std::sin(th));
      }
      const double nrm = std::hypot(gk / cs.h, gm);
      if (nrm > 1e-12) add_cap_row(gk / cs.h / nrm, gm / nrm);
    } else if (q == NormOrder::Inf && config.mode != CapacityMode::Fixed) {
      add_cap_row(1.0, 0.0);
      add_cap_row(0.0, 1.0);
    }
  }

  if (info.n_caps > 0 && std::isfinite(config.budget)) {
    std::vector<std::pair<int, double>> coeffs;
    for (int v = 0; v < n_dev; ++v) coeffs.emplace_back(cap_col[v], 1.0);
    add_row(std::move(coeffs), config.budget);
  }

  const int n_vars = static_cast<int>(cost.size());
  const int n_rows = static_cast<int>(rows.size());
  info.prob.c = Eigen::Map<Vec>(cost.data(), n_vars);
  info.prob.lb = Eigen::Map<Vec>(lo.data(), n_vars);
  info.prob.ub = Eigen::Map<Vec>(hi.data(), n_vars);
  info.prob.A = Mat::Zero(n_rows, n_vars);
  info.prob.b = Eigen::Map<Vec>(rhs.data(), n_rows);
  for (int r = 0; r < n_rows; ++r)
    for (const auto& [col, val] : rows[r]) info.prob.A(r, col) += val;

  info.const_offset = config.w_rocof_avg * bundle.rocof_avg +
                      config.w_overshoot_avg * bundle.overshoot_avg;
  return info;
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::MaxIterations: return "max-iterations";
    case Termination::ImprovementThreshold: return "improvement-threshold";
    case Termination::StepSizeFloor: return "step-size-floor";
  }
  return "?";
}

namespace {

// Pulls an iterate back inside the capability sets: radial per-device
// projection (exact for the q = 2 ball the LP only outer-approximates), then
// a global rescale when a total budget is exceeded.
std::vector<double> project_capability(Vec& alpha, const std::vector<CapabilitySpec>& caps,
                                       const PlacementConfig& config) {
  const int n_dev = static_cast<int>(caps.size());
  std::vector<double> usage(n_dev, 0.0);
  for (int v = 0; v < n_dev; ++v) {
    alpha[2 * v] = std::max(0.0, alpha[2 * v]);
    alpha[2 * v + 1] = std::max(0.0, alpha[2 * v + 1]);
    double u = caps[v].usage(alpha[2 * v], alpha[2 * v + 1]);
    if (config.mode == CapacityMode::Fixed && u > caps[v].capacity && u > 0.0) {
      const double s = caps[v].capacity / u;
      alpha[2 * v] *= s;
      alpha[2 * v + 1] *= s;
      u = caps[v].capacity;
    }
    usage[v] = u;
  }
  if (config.mode == CapacityMode::Budget) {
    double total = 0.0;
    for (double u : usage) total += u;
    if (total > config.budget && total > 0.0) {
      const double s = config.budget / total;
      alpha *= s;
      for (double& u : usage) u *= s;  // capacity usage is homogeneous in the gains
    }
  }
  return usage;
}

IterateRecord snapshot(int iter, const Vec& alpha, double obj, const MetricBundle& b,
                       const Vec& trust, bool accepted) {
  IterateRecord rec;
  rec.iteration = iter;
  rec.gains = alpha;
  rec.objective = obj;
  rec.zeta_min = b.zeta_min;
  rec.rocof_inf = b.rocof_inf;
  rec.overshoot_inf = b.overshoot_inf;
  rec.rocof_avg = b.rocof_avg;
  rec.overshoot_avg = b.overshoot_avg;
  rec.trust_max = trust.size() ? trust.maxCoeff() : 0.0;
  rec.accepted = accepted;
  return rec;
}

}  // namespace

PlacementResult place(const PowerSystemCase& sys_case, const PlacementConfig& config,
                      ExecMode exec) {
  config.validate();
  sys_case.validate();
  const int n_dev = static_cast<int>(sys_case.devices.size());
  if (n_dev == 0) throw InputError("placement requires a case with devices");
  const int n_params = 2 * n_dev;

  std::vector<CapabilitySpec> caps;
  for (const Device& dev : sys_case.devices) caps.push_back(config.capability_for(dev));

  Vec alpha = DeviceGains::from_case(sys_case).to_vector();
  for (int v = 0; v < n_dev; ++v) {
    if (alpha[2 * v] < 0.0 || alpha[2 * v + 1] < 0.0)
      throw InputError("initial gains must be nonnegative");
    if (config.mode == CapacityMode::Fixed &&
        caps[v].usage(alpha[2 * v], alpha[2 * v + 1]) > caps[v].capacity + 1e-9)
      throw InputError("initial gains of device '" + sys_case.devices[v].id +
                       "' violate its capability constraint");
  }
  if (config.mode == CapacityMode::Budget) {
    double total = 0.0;
    for (int v = 0; v < n_dev; ++v) total += caps[v].usage(alpha[2 * v], alpha[2 * v + 1]);
    if (total > config.budget + 1e-9)
      throw InputError("initial gains exceed the capacity budget");
  }

  Vec trust(n_params);
  for (int v = 0; v < n_dev; ++v) {
    double extent;
    switch (config.mode) {
      case CapacityMode::Fixed: extent = caps[v].capacity / caps[v].c; break;
      case CapacityMode::Budget: extent = config.budget / caps[v].c; break;
      default: extent = std::max(caps[v].capacity, 1.0) / caps[v].c; break;
    }
    extent = std::max(extent, 1e-3);
    trust[2 * v] = config.trust_initial > 0.0 ? config.trust_initial
                                              : config.trust_initial_fraction * extent;
    trust[2 * v + 1] = config.trust_initial > 0.0
                           ? config.trust_initial
                           : config.trust_initial_fraction * caps[v].h * extent;
  }

  PlacementResult result;
  MetricBundle bundle = evaluate(sys_case, DeviceGains::from_vector(alpha), exec);
  std::vector<double> capacities(n_dev);
  for (int v = 0; v < n_dev; ++v)
    capacities[v] = config.mode == CapacityMode::Fixed
                        ? caps[v].capacity
                        : caps[v].usage(alpha[2 * v], alpha[2 * v + 1]);
  double obj = true_objective(bundle, config, capacities);
  result.history.push_back(snapshot(0, alpha, obj, bundle, trust, true));
  result.termination = Termination::MaxIterations;

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    const LinearProgramInfo lp_info = build_lp(bundle, config, alpha, trust, caps);
    const lp::Solution sol = lp::solve(lp_info.prob);
    if (sol.status != lp::Status::Optimal)
      throw NumericalError("placement subproblem failed at iteration " +
                           std::to_string(iter));
    const Vec dalpha = sol.x.head(n_params);
    const double predicted = sol.objective + lp_info.const_offset;
    if (obj - predicted < config.improvement_threshold) {
      result.termination = Termination::ImprovementThreshold;
      break;
    }

    Vec alpha_try = alpha + dalpha;
    std::vector<double> usage = project_capability(alpha_try, caps, config);
    MetricBundle bundle_try =
        evaluate(sys_case, DeviceGains::from_vector(alpha_try), exec, &bundle);
    std::vector<double> caps_try(n_dev);
    for (int v = 0; v < n_dev; ++v)
      caps_try[v] = config.mode == CapacityMode::Fixed ? caps[v].capacity : usage[v];
    const double obj_try = true_objective(bundle_try, config, caps_try);

    if (obj_try < obj) {
      const double improvement = obj - obj_try;
      alpha = alpha_try;
      bundle = std::move(bundle_try);
      obj = obj_try;
      capacities = caps_try;
      result.history.push_back(snapshot(iter, alpha, obj, bundle, trust, true));
      if (improvement < config.improvement_threshold) {
        result.termination = Termination::ImprovementThreshold;
        break;
      }
    } else {
      result.history.push_back(snapshot(iter, alpha, obj, bundle, trust, false));
      bool any_hit = false;
      for (int p = 0; p < n_params; ++p)
        if (std::abs(dalpha[p]) >= trust[p] - 1e-12) any_hit = true;
      for (int p = 0; p < n_params; ++p)
        if (!any_hit || std::abs(dalpha[p]) >= trust[p] - 1e-12) trust[p] *= 0.5;
      if (trust.maxCoeff() < config.trust_floor) {
        result.termination = Termination::StepSizeFloor;
        break;
      }
    }
  }

  result.gains = DeviceGains::from_vector(alpha);
  result.metrics = std::move(bundle);
  result.capacities = capacities;
  for (double c : capacities) result.total_capacity += c;
  result.objective = obj;
  if (std::isfinite(config.zeta_lo))
    for (double z : result.metrics.zeta)
      result.zeta_violation = std::max(result.zeta_violation, config.zeta_lo - z);
  result.zeta_violation = std::max(result.zeta_violation, 0.0);
  auto bound_gap = [](double v, double lo, double hi) {
    double g = 0.0;
    if (std::isfinite(hi)) g = std::max(g, v - hi);
    if (std::isfinite(lo)) g = std::max(g, lo - v);
    return g;
  };
  for (int o = 0; o < result.metrics.m; ++o)
    for (int j = 0; j < result.metrics.d; ++j) {
      result.rocof_violation =
          std::max(result.rocof_violation,
                   bound_gap(result.metrics.rocof(o, j), config.rocof_lo, config.rocof_hi));
      result.overshoot_violation =
          std::max(result.overshoot_violation,
                   bound_gap(result.metrics.overshoot(o, j), config.overshoot_lo,
                             config.overshoot_hi));
    }
  return result;
}

PlacementResult min_capacity_place(const PowerSystemCase& sys_case,
                                   const PlacementConfig& config, ExecMode exec) {
  if (!std::isfinite(config.zeta_lo) && !std::isfinite(config.rocof_lo) &&
      !std::isfinite(config.rocof_hi) && !std::isfinite(config.overshoot_lo) &&
      !std::isfinite(config.overshoot_hi))
    throw InputError("minimum-capacity placement requires at least one metric bound");
  PlacementConfig cfg = config;
  cfg.mode = CapacityMode::Variable;
  if (!(cfg.w_capacity > 0.0)) cfg.w_capacity = 1.0;
  return place(sys_case, cfg, exec);
}

}  // namespace gridsi
