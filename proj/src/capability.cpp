#include "gridsi/capability.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace gridsi {

std::string norm_name(NormOrder p) {
  switch (p) {
    case NormOrder::One: return "1";
    case NormOrder::Two: return "2";
    case NormOrder::Inf: return "inf";
  }
  return "?";
}

NormOrder norm_from_string(const std::string& s) {
  if (s == "1") return NormOrder::One;
  if (s == "2") return NormOrder::Two;
  if (s == "inf" || s == "Inf" || s == "INF") return NormOrder::Inf;
  throw InputError("unknown norm order '" + s + "' (expected 1, 2 or inf)");
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto a = cell.find_first_not_of(" \t\r");
    const auto b = cell.find_last_not_of(" \t\r");
    cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  return cells;
}

double parse_cell(const std::string& cell, int row, int col) {
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
    throw InputError("measurement row " + std::to_string(row) + ", column " +
                     std::to_string(col + 1) + ": cannot parse '" + cell + "' as a number");
  return v;
}

double scaled_norm(NormOrder p, double a, double b) {
  a = std::abs(a);
  b = std::abs(b);
  switch (p) {
    case NormOrder::One: return a + b;
    case NormOrder::Two: return std::hypot(a, b);
    case NormOrder::Inf: return std::max(a, b);
  }
  return 0.0;
}

// n points on the boundary of the p-norm ball of radius r, corner points of
// the polyhedral cases included exactly.
std::vector<std::pair<double, double>> ball_boundary(NormOrder p, double r, int n) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(n + 8);
  if (p == NormOrder::Two) {
    for (int i = 0; i < n; ++i) {
      const double phi = 2.0 * kPi * i / n;
      pts.emplace_back(r * std::cos(phi), r * std::sin(phi));
    }
    return pts;
  }
  std::vector<std::pair<double, double>> corners;
  if (p == NormOrder::One)
    corners = {{r, 0.0}, {0.0, r}, {-r, 0.0}, {0.0, -r}};
  else
    corners = {{r, r}, {-r, r}, {-r, -r}, {r, -r}};
  const int per_edge = std::max(2, n / 4);
  for (int e = 0; e < 4; ++e) {
    const auto& s = corners[e];
    const auto& t = corners[(e + 1) % 4];
    for (int i = 0; i < per_edge; ++i) {
      const double w = static_cast<double>(i) / per_edge;
      pts.emplace_back(s.first + w * (t.first - s.first),
                       s.second + w * (t.second - s.second));
    }
  }
  return pts;
}

}  // namespace

MeasurementSet load_measurements(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw InputError("measurement file is empty");
  const auto header = split_csv_row(line);
  int col_t = -1, col_w = -1, col_r = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (header[i] == "time_s" || header[i] == "time") col_t = i;
    if (header[i] == "freq_dev_hz") col_w = i;
    if (header[i] == "rocof_hz_s") col_r = i;
  }
  if (col_t < 0 || col_w < 0)
    throw InputError("measurement header must name time_s and freq_dev_hz columns");

  MeasurementSet data;
  int row = 1;
  while (std::getline(ss, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_row(line);
    const int need = std::max(col_t, std::max(col_w, col_r)) + 1;
    if (static_cast<int>(cells.size()) < need)
      throw InputError("measurement row " + std::to_string(row) + ": expected " +
                       std::to_string(need) + " columns, found " +
                       std::to_string(cells.size()));
    data.time.push_back(parse_cell(cells[col_t], row, col_t));
    data.omega.push_back(parse_cell(cells[col_w], row, col_w));
    if (col_r >= 0) data.rocof.push_back(parse_cell(cells[col_r], row, col_r));
  }
  if (data.size() == 0) throw InputError("measurement file has no data rows");

  if (col_r < 0) {
    const int n = data.size();
    if (n < 2)
      throw InputError("cannot differentiate RoCoF from a single frequency sample");
    data.rocof.resize(n);
    for (int k = 0; k < n; ++k) {
      const int lo = std::max(0, k - 1), hi = std::min(n - 1, k + 1);
      const double dt = data.time[hi] - data.time[lo];
      if (!(dt > 0.0))
        throw InputError("measurement timestamps must be strictly increasing near row " +
                         std::to_string(k + 2));
      data.rocof[k] = (data.omega[hi] - data.omega[lo]) / dt;
    }
  }
  return data;
}

MeasurementSet load_measurements_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open measurement file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_measurements(ss.str());
}

CapabilityBall fit_norm_ball(const MeasurementSet& data, NormOrder p, double h,
                             double coverage, double c_floor) {
  if (data.size() == 0) throw InputError("cannot fit a capability ball to empty data");
  if (!(h > 0.0)) throw InputError("frequency scaling h must be positive");
  if (!(coverage > 0.0) || coverage > 1.0)
    throw InputError("coverage must lie in (0, 1]");

  const int n = data.size();
  std::vector<double> s(n);
  for (int k = 0; k < n; ++k) s[k] = scaled_norm(p, h * data.omega[k], data.rocof[k]);

  const int rank = std::min<int>(n, static_cast<int>(std::ceil(coverage * n)));
  std::nth_element(s.begin(), s.begin() + (rank - 1), s.end());

  CapabilityBall ball;
  ball.p = p;
  ball.h = h;
  ball.coverage = coverage;
  ball.c = s[rank - 1];
  if (ball.c <= c_floor) {
    ball.c = c_floor;
    ball.floored = true;
  }
  return ball;
}

double GainConstraint::gain_norm(double m_gain, double k_gain) const {
  switch (q) {
    case NormOrder::One: return std::abs(k_gain) / h + std::abs(m_gain);
    case NormOrder::Two: return std::hypot(k_gain / h, m_gain);
    case NormOrder::Inf: return std::max(std::abs(k_gain) / h, std::abs(m_gain));
  }
  return 0.0;
}

bool GainConstraint::contains(double m_gain, double k_gain, double tol) const {
  return gain_norm(m_gain, k_gain) <= bound + tol;
}

GainConstraint dual_constraint(const CapabilityBall& ball, double p_bar) {
  if (!(p_bar > 0.0)) throw InputError("power capacity must be positive");
  if (!(ball.c > 0.0)) throw InputError("capability ball radius must be positive");
  GainConstraint gc;
  switch (ball.p) {
    case NormOrder::One: gc.q = NormOrder::Inf; break;
    case NormOrder::Two: gc.q = NormOrder::Two; break;
    case NormOrder::Inf: gc.q = NormOrder::One; break;
  }
  gc.h = ball.h;
  gc.bound = p_bar / ball.c;
  return gc;
}

DualityReport verify_duality(const GainConstraint& constraint, const CapabilityBall& ball,
                             double p_bar, int grid, ExecMode exec) {
  if (grid < 8) throw InputError("duality grid resolution must be at least 8");

  // Work in scaled coordinates: primal (a, b) = (h w, wdot) on the p-ball of
  // radius c, dual (u, v) = (K/h, M) on the q-ball of radius P_bar/c. The
  // injected power K w + M wdot equals u a + v b.
  const auto primal = ball_boundary(ball.p, ball.c, grid);
  const auto dual = ball_boundary(constraint.q, constraint.bound, grid);

  std::vector<double> sup(dual.size(), 0.0);
  parallel_for(static_cast<int>(dual.size()), exec, [&](int i) {
    double best = 0.0;
    for (const auto& [a, b] : primal)
      best = std::max(best, std::abs(dual[i].first * a + dual[i].second * b));
    sup[i] = best;
  });

  DualityReport rep;
  rep.tight = true;
  rep.inflated_violates = true;
  for (double s : sup) {
    rep.max_power = std::max(rep.max_power, s);
    rep.worst_rel_err = std::max(rep.worst_rel_err, std::abs(s - p_bar) / p_bar);
    if (std::abs(s - p_bar) > 1e-6 * p_bar) rep.tight = false;
    if (1.01 * s <= p_bar) rep.inflated_violates = false;
  }
  return rep;
}

}  // namespace gridsi
