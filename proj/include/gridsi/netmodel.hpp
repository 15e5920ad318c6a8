#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridsi/types.hpp"

namespace gridsi {

struct Bus {
  std::string id;
};

struct Line {
  std::string from, to;
  double susceptance = 0.0;  // pu
};

struct Generator {
  std::string bus;
  double inertia = 0.0;   // s, on the machine base
  double damping = 0.0;   // pu
  double base = 1.0;      // machine base, pu of system base
};

struct Load {
  std::string bus;
  double power = 0.0;           // pu
  double motor_fraction = 0.1;  // share of the load behaving as motors
  double motor_inertia = 1.5;   // s, on the motor base
  double damping = 2.5;         // pu
};

struct Device {
  std::string id;
  std::string bus;
  double t1 = 0.05, t2 = 0.05;  // filter time constants, s
  double capacity = 0.0;        // power rating, pu
  double m_init = 0.0;          // initial synthetic inertia gain
  double k_init = 0.0;          // initial synthetic damping gain
};

struct Disturbance {
  std::string bus;
  double delta_p = 0.0;  // net injection step, pu
};

struct PowerSystemCase {
  double system_base_mva = 100.0;
  double nominal_frequency_hz = 50.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::vector<Device> devices;
  std::vector<Disturbance> disturbances;
  std::vector<std::string> outputs;  // monitored buses

  double omega0() const { return 2.0 * kPi * nominal_frequency_hz; }
  void validate() const;
  int device_index(const std::string& id) const;
};

PowerSystemCase load_case(const std::string& json_text);
PowerSystemCase load_case_file(const std::filesystem::path& path);

/// Gains for every device of a case, in case order.
struct DeviceGains {
  std::vector<double> inertia;  // M gains, one per device
  std::vector<double> damping;  // K gains, one per device

  static DeviceGains zeros(int n_devices) {
    return {std::vector<double>(n_devices, 0.0), std::vector<double>(n_devices, 0.0)};
  }
  static DeviceGains from_case(const PowerSystemCase& cs);
  Vec to_vector() const;                       // [m0, k0, m1, k1, ...]
  static DeviceGains from_vector(const Vec&);  // inverse of to_vector
};

/// One tunable gain with its single nonzero entry in dA/dalpha.
struct ParamInfo {
  std::string id;        // "<device>.M" or "<device>.K"
  int device = 0;        // index into case devices
  bool is_inertia = true;
  int row = 0, col = 0;  // location of the entry in A
  double value = 0.0;    // 1 / (t1 * t2)
};

struct LinearSystem {
  Mat A, B, C;
  std::vector<std::string> state_labels;
  std::vector<std::string> input_labels;
  std::vector<std::string> output_labels;
  std::unordered_map<std::string, int> freq_state;  // bus id -> frequency state index
  std::vector<ParamInfo> params;                    // empty until devices attached
  double omega0 = 2.0 * kPi * 50.0;

  int n() const { return static_cast<int>(A.rows()); }
  int n_inputs() const { return static_cast<int>(B.cols()); }
  int n_outputs() const { return static_cast<int>(C.rows()); }
};

/// Eliminates the algebraic block a22: returns a11 - a12 * a22^-1 * a21.
/// Throws NumericalError when a22 has condition estimate above 1e12.
Mat kron_reduce(const Mat& a11, const Mat& a12, const Mat& a21, const Mat& a22);

/// Swing-equation model of the case without devices. Buses with rotating
/// inertia (generators or motor loads) carry an angle and a frequency state;
/// purely static buses are eliminated from the network graph.
LinearSystem build_base_system(const PowerSystemCase& cs);

/// Closes the loop between the base system and the synthetic inertia devices
/// of the case, and registers the gain parameters.
LinearSystem attach_devices(const LinearSystem& base, const PowerSystemCase& cs,
                            const DeviceGains& gains);

/// Looks up the dA/dalpha entry for a registered parameter id.
SparseEntry system_derivative(const LinearSystem& sys, const std::string& param_id);

}  // namespace gridsi
