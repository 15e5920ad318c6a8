#pragma once

#include <cstdint>
#include <vector>

#include "gridsi/exec.hpp"
#include "gridsi/spectral.hpp"
#include "gridsi/types.hpp"

namespace gridsi {

using MatU8 = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Modal residues r_i = C u_i l_i B and step coefficients k_i = -r_i / lambda_i,
/// so the unit-step output is y(t) = sum_i k_i (1 - exp(lambda_i t)).
/// A rigid-body mode (lambda ~ 0) is admitted only when its residue vanishes;
/// such modes are marked inert and drop out of every sum.
struct ResidueSet {
  CVec lambda;
  std::vector<CMat> r;      // per mode, outputs x disturbances
  std::vector<CMat> k;      // per mode step coefficients, zero when inert
  std::vector<char> inert;  // structurally silent modes
  int m = 0, d = 0;

  int n_modes() const { return static_cast<int>(lambda.size()); }
};

ResidueSet residues(const ModalData& modal, const Mat& B, const Mat& C);

/// Evaluates the step response (order 0) or its time derivatives (order >= 1)
/// at one time per (output, disturbance) pair. times must be nonnegative.
Mat step_response(const ResidueSet& res, const Mat& times, int order,
                  ExecMode exec = ExecMode::Parallel);

/// Largest-magnitude excursions of the step response (find_overshoot) or of
/// its first derivative (find_rocof), per (output, disturbance) pair.
/// `value` keeps the sign of the excursion; `boundary` marks extrema pinned to
/// t = 0 or the search horizon where no interior stationary point dominates.
struct ExtremaField {
  Mat value;   // signed extremum
  Mat time;
  MatU8 boundary;
  MatU8 converged;

  Mat magnitude() const { return value.cwiseAbs(); }
};

struct SearchOptions {
  double horizon_cap = 60.0;       // s
  int grid_points = 1000;          // lower bound on bootstrap resolution
  int max_newton = 60;
  double stationarity_tol = 1e-10;  // relative first-order condition
};

ExtremaField find_overshoot(const ResidueSet& res, const SearchOptions& opt = {},
                            const Mat* seed_times = nullptr,
                            ExecMode exec = ExecMode::Parallel);
ExtremaField find_rocof(const ResidueSet& res, const SearchOptions& opt = {},
                        const Mat* seed_times = nullptr,
                        ExecMode exec = ExecMode::Parallel);

/// Mode-wise derivatives of eigenvalues, residues and step coefficients under
/// one registered parameter perturbation.
struct ResidueSensitivity {
  CVec dlambda;
  std::vector<CMat> dr;
  std::vector<CMat> dk;
};

ResidueSensitivity residue_sensitivity(const ModalData& modal, const ResidueSet& res,
                                       const Mat& B, const Mat& C,
                                       const std::vector<SparseEntry>& dA);

/// Parameter derivative of the signed overshoot value at the located extremum.
/// Interior extrema include the first-order shift of the peak time; boundary
/// extrema hold the time fixed.
Mat overshoot_sensitivity(const ResidueSet& res, const ResidueSensitivity& sens,
                          const ExtremaField& peaks);

/// Same for the signed rate-of-change-of-frequency extremum.
Mat rocof_sensitivity(const ResidueSet& res, const ResidueSensitivity& sens,
                      const ExtremaField& peaks);

/// Reference trajectories from direct adaptive integration of
/// xdot = A x + B e_j, one unit-step column at a time. Used to validate the
/// modal formulas; shares no code path with them.
struct OracleOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-13;
  long max_steps = 20000000;
};

struct OracleTrajectory {
  std::vector<Mat> y, yd, ydd;  // per disturbance, outputs x sample count
};

class StepOracle {
 public:
  StepOracle(Mat A, Mat B, Mat C, OracleOptions opt = {});
  /// times must be ascending and nonnegative.
  OracleTrajectory sample(const Vec& times) const;

 private:
  Mat a_, b_, c_, ca_;
  OracleOptions opt_;
};

}  // namespace gridsi
