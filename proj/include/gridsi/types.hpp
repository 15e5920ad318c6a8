#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gridsi {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (case files, configs, measurements).
struct InputError : Error {
  using Error::Error;
};

/// Conditioning or convergence failure in a numerical routine.
struct NumericalError : Error {
  using Error::Error;
};

/// Two eigenvalues too close for mode-wise perturbation formulas.
struct DegenerateSpectrumError : NumericalError {
  int mode_a, mode_b;
  DegenerateSpectrumError(const std::string& msg, int a, int b)
      : NumericalError(msg), mode_a(a), mode_b(b) {}
};

/// A single nonzero entry of a (sparse) matrix perturbation.
struct SparseEntry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace gridsi
