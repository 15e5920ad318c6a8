#include <doctest.h>

#include <complex>
#include <random>
#include <vector>

#include <gridsi/spectral.hpp>

#include "support.hpp"

using namespace gridsi;
using testutil::match_mode;
using testutil::random_matrix;
using testutil::random_stable;

namespace {

Mat dense_from(const std::vector<SparseEntry>& entries, int n) {
  Mat d = Mat::Zero(n, n);
  for (const auto& e : entries) d(e.row, e.col) += e.value;
  return d;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("diagonal matrices decompose exactly and sort ascending") {
  Mat a = Mat::Zero(3, 3);
  a.diagonal() << -3.0, -1.0, -2.0;
  ModalData m = eigensolve(a);
  CHECK(m.eigenvalues[0] == Complex(-3.0, 0.0));
  CHECK(m.eigenvalues[1] == Complex(-2.0, 0.0));
  CHECK(m.eigenvalues[2] == Complex(-1.0, 0.0));
  for (int i = 0; i < 3; ++i) {
    CHECK(m.conj_partner[i] == -1);
    CHECK(!m.oscillatory(i));
  }
  CHECK((m.left * m.right - CMat::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("a rotation block yields an exactly conjugate mode pair") {
  Mat a(2, 2);
  a << -1.0, 2.0, -2.0, -1.0;
  ModalData m = eigensolve(a);
  REQUIRE(m.n() == 2);
  // positive-imaginary member first
  CHECK(m.eigenvalues[0].real() == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(m.eigenvalues[0].imag() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(m.conj_partner[0] == 1);
  CHECK(m.conj_partner[1] == 0);
  CHECK(m.oscillatory(0));
  CHECK(!m.oscillatory(1));

  // the partner's data is the exact conjugate, not a second solver output
  CHECK(m.eigenvalues[1] == std::conj(m.eigenvalues[0]));
  CHECK((m.right.col(1) - m.right.col(0).conjugate()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m.left.row(1) - m.left.row(0).conjugate()).cwiseAbs().maxCoeff() == 0.0);

  // phase convention: largest entry of each right eigenvector real positive
  for (int i = 0; i < 2; ++i) {
    Eigen::Index arg;
    m.right.col(i).cwiseAbs().maxCoeff(&arg);
    Complex top = m.right(arg, i);
    CHECK(top.imag() == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(top.real() > 0.0);
  }
}

TEST_CASE("random decompositions are biorthonormal and reconstruct A") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 4; ++trial) {
    Mat a = random_matrix(12, 12, rng);
    ModalData m = eigensolve(a);

    CHECK(m.a_norm == doctest::Approx(a.norm()).epsilon(1e-14));
    CHECK(m.max_residual <= 1e-8);
    CHECK((m.left * m.right - CMat::Identity(12, 12)).cwiseAbs().maxCoeff() <= 1e-8);

    CMat rebuilt = m.right * m.eigenvalues.asDiagonal() * m.left;
    CHECK((rebuilt - a.cast<Complex>()).cwiseAbs().maxCoeff() <= 1e-7 * m.a_norm);
    CHECK(rebuilt.imag().cwiseAbs().maxCoeff() <= 1e-8 * m.a_norm);

    for (int i = 0; i < m.n(); ++i) {
      double res = ((a.cast<Complex>() * m.right.col(i)) -
                    m.eigenvalues[i] * m.right.col(i))
                       .norm();
      CHECK(res <= 1.1 * m.max_residual * m.a_norm + 1e-13);
    }
  }
}

TEST_CASE("damping ratio closed forms") {
  CHECK(damping_ratio(Complex(-1.0, 1.0)) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(damping_ratio(Complex(-3.0, 4.0)) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(damping_ratio(Complex(-2.0, 0.0)), InputError);
}

TEST_CASE("eigenvalue sensitivities match finite differences and the trace rule") {
  std::mt19937 rng(7);
  const int n = 10;
  Mat a = random_stable(n, rng);
  ModalData m = eigensolve(a);
  std::vector<SparseEntry> da = {{2, 3, 0.7}, {5, 1, -1.3}, {0, 0, 0.4}};
  CVec dl = eig_sensitivity(m, da);

  // trace invariance: the eigenvalue shifts sum to tr(dA)
  Complex sum = dl.sum();
  CHECK(sum.real() == doctest::Approx(0.4).epsilon(1e-9));
  CHECK(std::abs(sum.imag()) <= 1e-10);

  // conjugate pairs get conjugate derivatives
  for (int i = 0; i < m.n(); ++i)
    if (m.conj_partner[i] >= 0)
      CHECK(std::abs(dl[i] - std::conj(dl[m.conj_partner[i]])) <= 1e-12);

  const double eps = 1e-6;
  Mat dd = dense_from(da, n);
  ModalData hi = eigensolve(a + eps * dd);
  ModalData lo = eigensolve(a - eps * dd);
  for (int i = 0; i < n; ++i) {
    Complex fd = (hi.eigenvalues[match_mode(hi.eigenvalues, m.eigenvalues[i])] -
                  lo.eigenvalues[match_mode(lo.eigenvalues, m.eigenvalues[i])]) /
                 (2.0 * eps);
    CHECK(std::abs(fd - dl[i]) <= 1e-5 * (1.0 + std::abs(dl[i])));
  }
}

TEST_CASE("damping sensitivities follow the chain rule") {
  std::mt19937 rng(11);
  Mat a = random_stable(8, rng);
  ModalData m = eigensolve(a);
  std::vector<SparseEntry> da = {{1, 4, 1.0}, {6, 2, -0.5}};
  CVec dl = eig_sensitivity(m, da);

  const double eps = 1e-6;
  Mat dd = dense_from(da, 8);
  ModalData hi = eigensolve(a + eps * dd);
  ModalData lo = eigensolve(a - eps * dd);
  bool any = false;
  for (int i = 0; i < m.n(); ++i) {
    if (!m.oscillatory(i)) continue;
    any = true;
    double dz = damping_sensitivity(m.eigenvalues[i], dl[i]);
    double fd = (damping_ratio(hi.eigenvalues[match_mode(hi.eigenvalues, m.eigenvalues[i])]) -
                 damping_ratio(lo.eigenvalues[match_mode(lo.eigenvalues, m.eigenvalues[i])])) /
                (2.0 * eps);
    CHECK(dz == doctest::Approx(fd).epsilon(1e-4));
  }
  CHECK(any);  // the random draw must actually contain oscillatory modes
}

TEST_CASE("dyad derivatives match finite differences of u l") {
  // The dyad u_i l_i is gauge invariant, so its finite difference is
  // well-defined even though individual eigenvectors are not.
  std::mt19937 rng(13);
  const int n = 9;
  Mat a = random_stable(n, rng);
  ModalData m = eigensolve(a);
  std::vector<SparseEntry> da = {{0, 5, 0.9}, {7, 7, -0.6}};
  Mat dd = dense_from(da, n);

  const double eps = 1e-6;
  ModalData hi = eigensolve(a + eps * dd);
  ModalData lo = eigensolve(a - eps * dd);

  std::vector<int> rows = {0, 1, 2, 3}, cols = {0, 4, 8};
  for (int mode : {0, 2, 5}) {
    CMat got = dyad_derivative(m, da, mode, rows, cols);
    int ih = match_mode(hi.eigenvalues, m.eigenvalues[mode]);
    int il = match_mode(lo.eigenvalues, m.eigenvalues[mode]);
    CMat dyad_hi = hi.right.col(ih) * hi.left.row(ih);
    CMat dyad_lo = lo.right.col(il) * lo.left.row(il);
    double scale = dyad_hi.cwiseAbs().maxCoeff() / eps;
    for (size_t ri = 0; ri < rows.size(); ++ri)
      for (size_t ci = 0; ci < cols.size(); ++ci) {
        Complex fd =
            (dyad_hi(rows[ri], cols[ci]) - dyad_lo(rows[ri], cols[ci])) / (2.0 * eps);
        CHECK(std::abs(got(static_cast<int>(ri), static_cast<int>(ci)) - fd) <=
              1e-7 * scale);
      }
  }
}

TEST_CASE("coupled near-degenerate modes are rejected, decoupled ones pass") {
  const double split = 1e-10;
  Mat a = Mat::Zero(3, 3);
  a.diagonal() << -1.0, -1.0 - split, -5.0;

  // ascending sort puts -5 first; the nearby pair lands at modes 1 and 2.
  // A perturbation linking the two nearby modes is ill-posed.
  std::vector<SparseEntry> couple = {{0, 1, 1.0}, {1, 0, 1.0}};
  CHECK_THROWS_AS(dyad_derivative(eigensolve(a), couple, 1, {0, 1}, {0, 1}),
                  DegenerateSpectrumError);
  try {
    dyad_derivative(eigensolve(a), couple, 2, {0, 1}, {0, 1});
    FAIL("expected a degeneracy rejection");
  } catch (const DegenerateSpectrumError& e) {
    CHECK(((e.mode_a == 1 && e.mode_b == 2) || (e.mode_a == 2 && e.mode_b == 1)));
  }

  // one that leaves the nearby pair alone is fine for every mode
  std::vector<SparseEntry> aloof = {{2, 2, 1.0}};
  ModalData m = eigensolve(a);
  for (int mode = 0; mode < 3; ++mode) {
    CMat d = dyad_derivative(m, aloof, mode, {0, 1, 2}, {0, 1, 2});
    CHECK(d.cwiseAbs().maxCoeff() <= 1e-6);  // diagonal system: dyads frozen
  }
}

}  // TEST_SUITE
