#include "gridsi/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace gridsi {

namespace {

// Diagonal similarity scaling with radix-2 factors (exactly invertible).
// Standard iterative balancing: equalize row and column 1-norms.
Vec balance(Mat& a) {
  const int n = static_cast<int>(a.rows());
  Vec scale = Vec::Ones(n);
  bool converged = false;
  while (!converged) {
    converged = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      const double s = c + r;
      while (c < r / 2.0) {
        c *= 2.0;
        r /= 2.0;
        f *= 2.0;
      }
      while (c >= r * 2.0) {
        c /= 2.0;
        r *= 2.0;
        f /= 2.0;
      }
      if ((c + r) < 0.95 * s && f != 1.0) {
        converged = false;
        scale[i] *= f;
        a.col(i) *= f;
        a.row(i) /= f;
      }
    }
  }
  return scale;
}

}  // namespace

ModalData eigensolve(const Mat& A) {
  if (A.rows() != A.cols()) throw InputError("eigensolve requires a square matrix");
  const int n = static_cast<int>(A.rows());
  ModalData md;
  md.a_norm = A.norm();
  if (n == 0) {
    md.eigenvalues = CVec(0);
    md.right = CMat(0, 0);
    md.left = CMat(0, 0);
    return md;
  }

  Mat ab = A;
  const Vec scale = balance(ab);

  Eigen::EigenSolver<Mat> solver(ab, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigenvalue iteration did not converge");

  CVec lam = solver.eigenvalues();
  CMat u = solver.eigenvectors();

  // Inverse of the balanced eigenvector matrix gives the biorthonormal left set.
  Eigen::PartialPivLU<CMat> lu(u);
  const double rcond_proxy = std::abs(lu.determinant());
  if (!(rcond_proxy > 0.0) || !std::isfinite(rcond_proxy))
    throw NumericalError("eigenvector matrix is numerically singular (defective system)");
  CMat l = lu.inverse();

  // Undo the balancing: u <- D u, l <- l D^-1 (exact, D is radix-2).
  for (int i = 0; i < n; ++i) {
    u.row(i) *= scale[i];
    l.col(i) /= scale[i];
  }

  // Canonical order: ascending real part, then |Im|, positive member first.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double ra = lam[a].real(), rb = lam[b].real();
    if (ra != rb) return ra < rb;
    const double ia = std::abs(lam[a].imag()), ib = std::abs(lam[b].imag());
    if (ia != ib) return ia < ib;
    return lam[a].imag() > lam[b].imag();
  });

  md.eigenvalues = CVec(n);
  md.right = CMat(n, n);
  md.left = CMat(n, n);
  for (int i = 0; i < n; ++i) {
    md.eigenvalues[i] = lam[order[i]];
    md.right.col(i) = u.col(order[i]);
    md.left.row(i) = l.row(order[i]);
  }

  // Phase convention and exact conjugate pairing.
  md.conj_partner.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    const Complex li = md.eigenvalues[i];
    if (li.imag() < 0.0) continue;  // handled with its partner

    int big = 0;
    for (int r = 1; r < n; ++r)
      if (std::abs(md.right(r, i)) > std::abs(md.right(big, i))) big = r;
    const Complex pivot = md.right(big, i);
    if (std::abs(pivot) > 0.0) {
      const Complex phase = pivot / std::abs(pivot);
      md.right.col(i) /= phase;
      md.left.row(i) *= phase;
    }

    if (li.imag() > 0.0) {
      const int j = i + 1;
      if (j >= n || std::abs(md.eigenvalues[j] - std::conj(li)) >
                        1e-8 * std::max(1.0, std::abs(li)))
        throw NumericalError("conjugate eigenvalue pairing failed");
      md.eigenvalues[j] = std::conj(li);
      md.right.col(j) = md.right.col(i).conjugate();
      md.left.row(j) = md.left.row(i).conjugate();
      md.conj_partner[i] = j;
      md.conj_partner[j] = i;
    } else if (li.imag() == 0.0) {
      // Real mode: strip any residual imaginary dust.
      md.right.col(i) = md.right.col(i).real().cast<Complex>();
      md.left.row(i) = md.left.row(i).real().cast<Complex>();
    }
  }

  // Residuals of both eigenvector sets, relative to ||A||.
  const CMat ac = A.cast<Complex>();
  double resid = 0.0;
  for (int i = 0; i < n; ++i) {
    const Complex li = md.eigenvalues[i];
    resid = std::max(resid,
                     (ac * md.right.col(i) - li * md.right.col(i)).cwiseAbs().maxCoeff());
    resid = std::max(
        resid,
        (md.left.row(i) * ac - li * md.left.row(i)).cwiseAbs().maxCoeff());
  }
  md.max_residual = md.a_norm > 0.0 ? resid / md.a_norm : resid;
  if (md.max_residual > 1e-8)
    throw NumericalError("eigendecomposition residual too large (near-defective system)");

  md.min_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      md.min_gap = std::min(md.min_gap, std::abs(md.eigenvalues[i] - md.eigenvalues[j]));

  return md;
}

double damping_ratio(Complex lambda) {
  if (!(lambda.imag() > 0.0))
    throw InputError("damping ratio is defined for modes with positive imaginary part");
  const double s = lambda.real(), w = lambda.imag();
  return -s / std::sqrt(s * s + w * w);
}

CVec eig_sensitivity(const ModalData& modal, const std::vector<SparseEntry>& dA) {
  const int n = modal.n();
  CVec d(n);
  for (int i = 0; i < n; ++i) {
    Complex acc = 0.0;
    for (const auto& e : dA) acc += e.value * modal.left(i, e.row) * modal.right(e.col, i);
    d[i] = acc;
  }
  return d;
}

double damping_sensitivity(Complex lambda, Complex dlambda) {
  if (!(lambda.imag() > 0.0))
    throw InputError("damping sensitivity is defined for modes with positive imaginary part");
  const double s = lambda.real(), w = lambda.imag();
  const double ds = dlambda.real(), dw = dlambda.imag();
  const double mag = std::pow(s * s + w * w, 1.5);
  return w * (s * dw - w * ds) / mag;
}

CMat dyad_derivative(const ModalData& modal, const std::vector<SparseEntry>& dA,
                     int mode, const std::vector<int>& rows,
                     const std::vector<int>& cols) {
  const int n = modal.n();
  if (mode < 0 || mode >= n) throw InputError("mode index out of range");
  const double gap_tol = modal.degeneracy_threshold();

  auto apply = [&](int j, int i) {  // l_j * dA * u_i
    Complex acc = 0.0;
    for (const auto& e : dA) acc += e.value * modal.left(j, e.row) * modal.right(e.col, i);
    return acc;
  };
  double entry_scale = 0.0;
  for (const auto& e : dA) entry_scale = std::max(entry_scale, std::abs(e.value));

  CMat out = CMat::Zero(rows.size(), cols.size());
  const Complex li = modal.eigenvalues[mode];
  for (int j = 0; j < n; ++j) {
    if (j == mode) continue;
    const Complex gap = li - modal.eigenvalues[j];
    const Complex num_ij = apply(j, mode);  // couples mode into direction j
    const Complex num_ji = apply(mode, j);
    if (std::abs(gap) < gap_tol) {
      // An uncoupled coincidence (e.g. independent device poles) contributes
      // nothing; genuine coupling across a vanishing gap is not differentiable.
      const double couple_tol =
          1e-9 * entry_scale *
          std::max(modal.left.row(j).cwiseAbs().maxCoeff() *
                       modal.right.col(mode).cwiseAbs().maxCoeff(),
                   modal.left.row(mode).cwiseAbs().maxCoeff() *
                       modal.right.col(j).cwiseAbs().maxCoeff());
      if (std::abs(num_ij) <= couple_tol && std::abs(num_ji) <= couple_tol) continue;
      throw DegenerateSpectrumError(
          "eigenvalues of modes " + std::to_string(mode) + " and " + std::to_string(j) +
              " are degenerate under this perturbation",
          mode, j);
    }
    const Complex c_ij = num_ij / gap;
    const Complex c_ji = num_ji / (-gap);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        out(r, c) += modal.right(rows[r], j) * c_ij * modal.left(mode, cols[c]) -
                     modal.right(rows[r], mode) * c_ji * modal.left(j, cols[c]);
  }
  return out;
}

}  // namespace gridsi
