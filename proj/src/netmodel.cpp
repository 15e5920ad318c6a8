#include "gridsi/netmodel.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/SVD>

#include "json.hpp"

namespace gridsi {

using nlohmann::json;

namespace {

// Translates a byte offset from a json parse error into line/column.
std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

double get_num(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw InputError(where + ": missing field '" + key + "'");
  if (!j[key].is_number())
    throw InputError(where + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

double get_num_or(const json& j, const char* key, double dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number())
    throw InputError(where + ": field '" + key + "' must be a number");
  return j[key].get<double>();
}

std::string get_str(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key))
    throw InputError(where + ": missing field '" + key + "'");
  if (!j[key].is_string())
    throw InputError(where + ": field '" + key + "' must be a string");
  return j[key].get<std::string>();
}

}  // namespace

void PowerSystemCase::validate() const {
  if (system_base_mva <= 0.0) throw InputError("system_base_mva must be positive");
  if (nominal_frequency_hz <= 0.0) throw InputError("nominal_frequency_hz must be positive");
  if (buses.empty()) throw InputError("case has no buses");

  std::set<std::string> ids;
  for (const auto& b : buses) {
    if (b.id.empty()) throw InputError("bus with empty id");
    if (!ids.insert(b.id).second) throw InputError("duplicate bus id '" + b.id + "'");
  }
  auto need_bus = [&](const std::string& id, const std::string& who) {
    if (!ids.count(id))
      throw InputError(who + " references unknown bus '" + id + "'");
  };

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& ln = lines[i];
    const std::string who = "line " + ln.from + "-" + ln.to;
    need_bus(ln.from, who);
    need_bus(ln.to, who);
    if (ln.from == ln.to) throw InputError(who + " connects a bus to itself");
    if (!(ln.susceptance > 0.0))
      throw InputError(who + " must have positive susceptance");
  }
  for (const auto& g : generators) {
    const std::string who = "generator at bus " + g.bus;
    need_bus(g.bus, who);
    if (!(g.inertia > 0.0)) throw InputError(who + ": inertia must be positive");
    if (g.damping < 0.0) throw InputError(who + ": damping must be nonnegative");
    if (!(g.base > 0.0)) throw InputError(who + ": base must be positive");
  }
  for (const auto& l : loads) {
    const std::string who = "load at bus " + l.bus;
    need_bus(l.bus, who);
    if (l.power < 0.0) throw InputError(who + ": power must be nonnegative");
    if (l.motor_fraction < 0.0 || l.motor_fraction > 1.0)
      throw InputError(who + ": motor_fraction must lie in [0, 1]");
    if (l.motor_inertia < 0.0) throw InputError(who + ": motor_inertia must be nonnegative");
    if (l.damping < 0.0) throw InputError(who + ": damping must be nonnegative");
  }
  std::set<std::string> dev_ids;
  for (const auto& d : devices) {
    const std::string who = "device '" + d.id + "'";
    if (d.id.empty()) throw InputError("device with empty id");
    if (!dev_ids.insert(d.id).second) throw InputError("duplicate device id '" + d.id + "'");
    need_bus(d.bus, who);
    if (!(d.t1 > 0.0) || !(d.t2 > 0.0))
      throw InputError(who + ": time constants must be positive");
    if (d.capacity < 0.0) throw InputError(who + ": capacity must be nonnegative");
    if (d.m_init < 0.0 || d.k_init < 0.0)
      throw InputError(who + ": initial gains must be nonnegative");
  }
  for (const auto& s : disturbances) need_bus(s.bus, "disturbance");
  if (disturbances.empty()) throw InputError("case has no disturbances");
  for (const auto& o : outputs) need_bus(o, "output");
  if (outputs.empty()) throw InputError("case has no monitored outputs");

  // Connectivity of the bus graph.
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < buses.size(); ++i) index[buses[i].id] = static_cast<int>(i);
  std::vector<std::vector<int>> adj(buses.size());
  for (const auto& ln : lines) {
    adj[index[ln.from]].push_back(index[ln.to]);
    adj[index[ln.to]].push_back(index[ln.from]);
  }
  std::vector<char> seen(buses.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        stack.push_back(w);
      }
  }
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (!seen[i])
      throw InputError("bus '" + buses[i].id + "' is disconnected from the network");
}

int PowerSystemCase::device_index(const std::string& id) const {
  for (std::size_t i = 0; i < devices.size(); ++i)
    if (devices[i].id == id) return static_cast<int>(i);
  throw InputError("unknown device id '" + id + "'");
}

PowerSystemCase load_case(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("case file parse error at ") + locate(text, e.byte) +
                     ": " + e.what());
  }
  if (!j.is_object()) throw InputError("case file must contain a JSON object");

  PowerSystemCase cs;
  cs.system_base_mva = get_num_or(j, "system_base_mva", 100.0, "case");
  cs.nominal_frequency_hz = get_num_or(j, "nominal_frequency_hz", 50.0, "case");

  if (!j.contains("buses") || !j["buses"].is_array())
    throw InputError("case: missing 'buses' array");
  for (const auto& jb : j["buses"]) {
    if (jb.is_string())
      cs.buses.push_back({jb.get<std::string>()});
    else
      cs.buses.push_back({get_str(jb, "id", "bus")});
  }
  for (const auto& jl : j.value("lines", json::array())) {
    Line ln;
    ln.from = get_str(jl, "from", "line");
    ln.to = get_str(jl, "to", "line");
    ln.susceptance = get_num(jl, "susceptance", "line " + ln.from + "-" + ln.to);
    cs.lines.push_back(ln);
  }
  for (const auto& jg : j.value("generators", json::array())) {
    Generator g;
    g.bus = get_str(jg, "bus", "generator");
    const std::string who = "generator at bus " + g.bus;
    g.inertia = get_num(jg, "inertia", who);
    g.damping = get_num_or(jg, "damping", 0.0, who);
    g.base = get_num_or(jg, "base", 1.0, who);
    cs.generators.push_back(g);
  }
  for (const auto& jl : j.value("loads", json::array())) {
    Load l;
    l.bus = get_str(jl, "bus", "load");
    const std::string who = "load at bus " + l.bus;
    l.power = get_num(jl, "power", who);
    l.motor_fraction = get_num_or(jl, "motor_fraction", 0.1, who);
    l.motor_inertia = get_num_or(jl, "motor_inertia", 1.5, who);
    l.damping = get_num_or(jl, "damping", 2.5, who);
    cs.loads.push_back(l);
  }
  int dev_count = 0;
  for (const auto& jd : j.value("devices", json::array())) {
    Device d;
    d.bus = get_str(jd, "bus", "device");
    d.id = jd.contains("id") ? get_str(jd, "id", "device")
                             : "dev" + std::to_string(dev_count);
    const std::string who = "device '" + d.id + "'";
    d.t1 = get_num(jd, "t1", who);
    d.t2 = get_num(jd, "t2", who);
    d.capacity = get_num_or(jd, "capacity", 0.0, who);
    d.m_init = get_num_or(jd, "m_init", 0.0, who);
    d.k_init = get_num_or(jd, "k_init", 0.0, who);
    cs.devices.push_back(d);
    ++dev_count;
  }
  for (const auto& js : j.value("disturbances", json::array())) {
    Disturbance s;
    s.bus = get_str(js, "bus", "disturbance");
    s.delta_p = get_num(js, "delta_p", "disturbance at bus " + s.bus);
    cs.disturbances.push_back(s);
  }
  for (const auto& jo : j.value("outputs", json::array())) {
    if (!jo.is_string()) throw InputError("outputs must be a list of bus ids");
    cs.outputs.push_back(jo.get<std::string>());
  }

  cs.validate();
  return cs;
}

PowerSystemCase load_case_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open case file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_case(ss.str());
}

DeviceGains DeviceGains::from_case(const PowerSystemCase& cs) {
  DeviceGains g;
  for (const auto& d : cs.devices) {
    g.inertia.push_back(d.m_init);
    g.damping.push_back(d.k_init);
  }
  return g;
}

Vec DeviceGains::to_vector() const {
  Vec v(2 * inertia.size());
  for (std::size_t i = 0; i < inertia.size(); ++i) {
    v[2 * i] = inertia[i];
    v[2 * i + 1] = damping[i];
  }
  return v;
}

DeviceGains DeviceGains::from_vector(const Vec& v) {
  DeviceGains g;
  for (Eigen::Index i = 0; i + 1 < v.size(); i += 2) {
    g.inertia.push_back(v[i]);
    g.damping.push_back(v[i + 1]);
  }
  return g;
}

Mat kron_reduce(const Mat& a11, const Mat& a12, const Mat& a21, const Mat& a22) {
  if (a22.rows() == 0) return a11;
  Eigen::JacobiSVD<Mat> svd(a22, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smin > 0.0) || smax / smin > 1e12)
    throw NumericalError("algebraic block is singular or ill-conditioned in reduction");
  return a11 - a12 * svd.solve(a21);
}

namespace {

struct BusAggregate {
  double inertia = 0.0;  // sum of M * S_B over units at the bus
  double damping = 0.0;
  bool has_generator = false;
};

}  // namespace

LinearSystem build_base_system(const PowerSystemCase& cs) {
  cs.validate();
  const int nb = static_cast<int>(cs.buses.size());
  std::unordered_map<std::string, int> bus_index;
  for (int i = 0; i < nb; ++i) bus_index[cs.buses[i].id] = i;

  std::vector<BusAggregate> agg(nb);
  for (const auto& g : cs.generators) {
    auto& a = agg[bus_index.at(g.bus)];
    a.inertia += g.inertia * g.base;
    a.damping += g.damping;
    a.has_generator = true;
  }
  for (const auto& l : cs.loads) {
    auto& a = agg[bus_index.at(l.bus)];
    const double motor_base = l.motor_fraction * l.power;
    if (motor_base > 0.0) {
      a.inertia += l.motor_inertia * motor_base;
      a.damping += l.damping;
    }
  }

  // Dynamic buses in case order, generator buses first.
  std::vector<int> dyn, alg;
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < nb; ++i) {
      if (!(agg[i].inertia > 0.0)) continue;
      if ((pass == 0) == agg[i].has_generator) dyn.push_back(i);
    }
  for (int i = 0; i < nb; ++i)
    if (!(agg[i].inertia > 0.0)) alg.push_back(i);
  const int nd = static_cast<int>(dyn.size());
  if (nd == 0) throw InputError("case has no rotating inertia at any bus");

  // Susceptance Laplacian over all buses.
  Mat lap = Mat::Zero(nb, nb);
  for (const auto& ln : cs.lines) {
    const int i = bus_index.at(ln.from), j = bus_index.at(ln.to);
    lap(i, i) += ln.susceptance;
    lap(j, j) += ln.susceptance;
    lap(i, j) -= ln.susceptance;
    lap(j, i) -= ln.susceptance;
  }

  auto slice = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    Mat m(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c) m(r, c) = lap(rows[r], cols[c]);
    return m;
  };

  // Reduce algebraic buses; keep the map that folds their injections onto
  // the dynamic buses.
  Mat lap_red = slice(dyn, dyn);
  Mat inj_spread;  // nd x #alg
  if (!alg.empty()) {
    const Mat laa = slice(alg, alg);
    const Mat lda = slice(dyn, alg);
    const Mat lad = slice(alg, dyn);
    lap_red = kron_reduce(lap_red, lda, lad, laa);
    Eigen::PartialPivLU<Mat> lu(laa);
    inj_spread = -lda * lu.inverse();
  }

  const double w0 = cs.omega0();
  const int n = 2 * nd;
  LinearSystem sys;
  sys.omega0 = w0;
  sys.A = Mat::Zero(n, n);
  for (int i = 0; i < nd; ++i) sys.A(i, nd + i) = w0;
  for (int i = 0; i < nd; ++i) {
    const double m = agg[dyn[i]].inertia;
    for (int j = 0; j < nd; ++j) sys.A(nd + i, j) = -lap_red(i, j) / m;
    sys.A(nd + i, nd + i) -= agg[dyn[i]].damping / m;
  }

  for (int i = 0; i < nd; ++i) {
    sys.state_labels.push_back("delta:" + cs.buses[dyn[i]].id);
  }
  for (int i = 0; i < nd; ++i) {
    sys.state_labels.push_back("omega:" + cs.buses[dyn[i]].id);
    sys.freq_state[cs.buses[dyn[i]].id] = nd + i;
  }

  std::unordered_map<int, int> dyn_pos, alg_pos;
  for (int i = 0; i < nd; ++i) dyn_pos[dyn[i]] = i;
  for (std::size_t i = 0; i < alg.size(); ++i) alg_pos[alg[i]] = static_cast<int>(i);

  const int d = static_cast<int>(cs.disturbances.size());
  sys.B = Mat::Zero(n, d);
  for (int k = 0; k < d; ++k) {
    const int b = bus_index.at(cs.disturbances[k].bus);
    const double dp = cs.disturbances[k].delta_p;
    Vec inj = Vec::Zero(nd);
    if (dyn_pos.count(b)) {
      inj[dyn_pos[b]] = dp;
    } else {
      inj = inj_spread.col(alg_pos.at(b)) * dp;
    }
    for (int i = 0; i < nd; ++i) sys.B(nd + i, k) = inj[i] / agg[dyn[i]].inertia;
    sys.input_labels.push_back("dP:" + cs.disturbances[k].bus);
  }

  const int m = static_cast<int>(cs.outputs.size());
  sys.C = Mat::Zero(m, n);
  for (int o = 0; o < m; ++o) {
    auto it = sys.freq_state.find(cs.outputs[o]);
    if (it == sys.freq_state.end())
      throw InputError("monitored bus '" + cs.outputs[o] +
                       "' has no frequency state (no rotating inertia)");
    sys.C(o, it->second) = w0;
    sys.output_labels.push_back("omega:" + cs.outputs[o]);
  }
  return sys;
}

LinearSystem attach_devices(const LinearSystem& base, const PowerSystemCase& cs,
                            const DeviceGains& gains) {
  const int nv = static_cast<int>(cs.devices.size());
  if (static_cast<int>(gains.inertia.size()) != nv ||
      static_cast<int>(gains.damping.size()) != nv)
    throw InputError("gain vector length does not match device count");

  const int n0 = base.n();
  const int n = n0 + 2 * nv;
  LinearSystem sys;
  sys.omega0 = base.omega0;
  sys.state_labels = base.state_labels;
  sys.input_labels = base.input_labels;
  sys.output_labels = base.output_labels;
  sys.freq_state = base.freq_state;

  sys.A = Mat::Zero(n, n);
  sys.A.topLeftCorner(n0, n0) = base.A;
  sys.B = Mat::Zero(n, base.n_inputs());
  sys.B.topRows(n0) = base.B;
  sys.C = Mat::Zero(base.n_outputs(), n);
  sys.C.leftCols(n0) = base.C;

  // Aggregate M * S_B per dynamic bus, recovered from the base A: the angle
  // row of a frequency state holds omega0, and the acceleration row scaling
  // was folded in during assembly. Recompute from the case instead.
  std::unordered_map<std::string, double> bus_inertia;
  for (const auto& g : cs.generators) bus_inertia[g.bus] += g.inertia * g.base;
  for (const auto& l : cs.loads) {
    const double mb = l.motor_fraction * l.power;
    if (mb > 0.0) bus_inertia[l.bus] += l.motor_inertia * mb;
  }

  for (int v = 0; v < nv; ++v) {
    const Device& dv = cs.devices[v];
    auto it = base.freq_state.find(dv.bus);
    if (it == base.freq_state.end())
      throw InputError("device '" + dv.id + "' sits at bus '" + dv.bus +
                       "' which has no frequency state");
    const int wcol = it->second;
    const int p_row = n0 + 2 * v;      // injected power state
    const int w_row = n0 + 2 * v + 1;  // internal frequency measurement state
    const double t12 = dv.t1 * dv.t2;

    sys.A(p_row, p_row) = -(dv.t1 + dv.t2) / t12;
    sys.A(p_row, w_row) = 1.0;
    sys.A(w_row, p_row) = -1.0 / t12;
    sys.A(p_row, wcol) = gains.inertia[v] / t12;
    sys.A(w_row, wcol) = gains.damping[v] / t12;

    // Injected power enters the bus power balance like any other injection.
    sys.A(wcol, p_row) = -1.0 / bus_inertia.at(dv.bus);

    sys.state_labels.push_back("dev_p:" + dv.id);
    sys.state_labels.push_back("dev_w:" + dv.id);

    sys.params.push_back({dv.id + ".M", v, true, p_row, wcol, 1.0 / t12});
    sys.params.push_back({dv.id + ".K", v, false, w_row, wcol, 1.0 / t12});
  }
  return sys;
}

SparseEntry system_derivative(const LinearSystem& sys, const std::string& param_id) {
  for (const auto& p : sys.params)
    if (p.id == param_id) return {p.row, p.col, p.value};
  throw InputError("unknown parameter id '" + param_id + "'");
}

}  // namespace gridsi
