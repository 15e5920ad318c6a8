#pragma once

#include <vector>

#include "gridsi/types.hpp"

namespace gridsi {

/// Full eigendecomposition with a biorthonormal left/right eigenvector set:
/// left.row(i) * right.col(j) == delta_ij and left * A * right == diag(lambda).
/// Modes are sorted by (Re, |Im|) with the positive-imaginary member of a
/// conjugate pair first; the pair's vectors are exact conjugates. Each right
/// eigenvector has its largest-magnitude entry real and positive.
struct ModalData {
  CVec eigenvalues;
  CMat right;  // columns are right eigenvectors
  CMat left;   // rows are left eigenvectors
  std::vector<int> conj_partner;  // index of the conjugate mode, -1 for real
  double a_norm = 0.0;            // Frobenius norm of A
  double max_residual = 0.0;      // worst eigen-residual, relative to a_norm
  double min_gap = 0.0;           // smallest pairwise eigenvalue distance

  int n() const { return static_cast<int>(eigenvalues.size()); }
  bool oscillatory(int i) const { return eigenvalues[i].imag() > 0.0; }
  double degeneracy_threshold() const { return 1e-8 * a_norm; }
};

ModalData eigensolve(const Mat& A);

/// zeta = -Re(lambda) / |lambda| for a mode with positive imaginary part.
double damping_ratio(Complex lambda);

/// First-order change of every eigenvalue under the perturbation dA,
/// given as a list of nonzero entries.
CVec eig_sensitivity(const ModalData& modal, const std::vector<SparseEntry>& dA);

/// Chain rule from an eigenvalue derivative to the damping-ratio derivative.
double damping_sensitivity(Complex lambda, Complex dlambda);

/// Derivative of the eigen-dyad u_i * l_i under dA, materialized only at the
/// requested (row, col) entries. Throws DegenerateSpectrumError when another
/// mode sits within the degeneracy threshold and actually couples through dA.
CMat dyad_derivative(const ModalData& modal, const std::vector<SparseEntry>& dA,
                     int mode, const std::vector<int>& rows,
                     const std::vector<int>& cols);

}  // namespace gridsi
