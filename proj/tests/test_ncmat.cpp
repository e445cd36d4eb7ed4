#include <gtest/gtest.h>

#include "oracles.hpp"
#include "paralab/ncmat.hpp"

using namespace paralab;

namespace {

CMatrix reconstruct(const EigenDecomposition& e) {
  const std::size_t m = e.values.size();
  CMatrix d(m);
  for (std::size_t i = 0; i < m; ++i) d(i, i) = e.values[i];
  return e.vectors * d * e.vectors.adjoint();
}

}  // namespace

TEST(CMatrix, ConstructionAndShape) {
  EXPECT_THROW(CMatrix::from_entries(2, std::vector<cplx>{1.0, 2.0, 3.0}), std::invalid_argument);
  const std::vector<cplx> bad{1.0, std::nan(""), 0.0, 1.0};
  EXPECT_THROW(CMatrix::from_entries(2, bad), std::invalid_argument);
  const CMatrix x = CMatrix::from_rows({{1.0, cplx(0, 2)}, {3.0, 4.0}});
  EXPECT_EQ(x(0, 1), cplx(0, 2));
  EXPECT_EQ(x.adjoint()(1, 0), cplx(0, -2));
  EXPECT_EQ(x.trace(), cplx(5.0));
  EXPECT_THROW(x + CMatrix(3), std::invalid_argument);
}

TEST(HermEig, KnownSpectra) {
  const EigenDecomposition a = herm_eig(CMatrix::diagonal({3.0, 1.0}));
  EXPECT_NEAR(a.values[0], 3.0, 1e-14);
  EXPECT_NEAR(a.values[1], 1.0, 1e-14);
  EXPECT_LT(max_abs_diff(a.vectors, CMatrix::identity(2)), 1e-14);

  const EigenDecomposition x = herm_eig(CMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}));
  EXPECT_NEAR(x.values[0], 1.0, 1e-14);
  EXPECT_NEAR(x.values[1], -1.0, 1e-14);

  EXPECT_THROW(herm_eig(CMatrix::from_rows({{0.0, 1.0}, {0.0, 0.0}})), std::invalid_argument);
}

TEST(HermEig, RandomReconstructionAndUnitaryInvariance) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const CMatrix h = random_hermitian(5, rng);
    const EigenDecomposition e = herm_eig(h);
    EXPECT_LT(max_abs_diff(reconstruct(e), h), 1e-10);
    EXPECT_LT(max_abs_diff(e.vectors.adjoint() * e.vectors, CMatrix::identity(5)), 1e-12);
    const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<oracle::EMat>(oracle::to_eigen(h)).eigenvalues();
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(e.values[static_cast<std::size_t>(i)], ref(4 - i), 1e-10);

    const CMatrix u = random_unitary(5, rng);
    const EigenDecomposition eu = herm_eig(u.adjoint() * h * u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(eu.values[i], e.values[i], 1e-9);
  }
}

TEST(MatrixAbsPower, Examples) {
  EXPECT_LT(max_abs_diff(matrix_abs_power(CMatrix::diagonal({-2.0, 3.0}), 1.0), CMatrix::diagonal({2.0, 3.0})), 1e-13);
  Rng rng(5);
  const CMatrix u = random_unitary(3, rng);
  for (double p : {0.5, 1.0, 3.0}) EXPECT_LT(max_abs_diff(matrix_abs_power(u, p), CMatrix::identity(3)), 1e-10);
  const CMatrix n = CMatrix::from_rows({{0.0, 2.0}, {0.0, 0.0}});
  EXPECT_LT(max_abs_diff(matrix_abs_power(n, 2.0), CMatrix::diagonal({0.0, 4.0})), 1e-13);
  for (int t = 0; t < 10; ++t) {
    const CMatrix x = random_gaussian(4, rng);
    EXPECT_LT(max_abs_diff(matrix_abs_power(x, 2.0), x.adjoint() * x), 1e-10);
  }
  EXPECT_THROW(matrix_abs_power(n, -1.0), std::invalid_argument);
}

TEST(SchattenNorm, Examples) {
  EXPECT_NEAR(schatten_norm(CMatrix::identity(2), 1.0), 2.0, 1e-14);
  for (double p : {1.0, 1.5, 2.0, 3.0, 7.0}) EXPECT_NEAR(schatten_norm(CMatrix::identity(2), p), std::pow(2.0, 1.0 / p), 1e-13);
  EXPECT_NEAR(schatten_norm(CMatrix::identity(2), kInf), 1.0, 1e-14);
  // rank one with Hilbert-Schmidt norm 3
  const CMatrix r = CMatrix::from_rows({{1.0, 2.0}, {0.0, 0.0}}) * (3.0 / std::sqrt(5.0));
  for (double p : {1.0, 2.0, 4.0, kInf}) EXPECT_NEAR(schatten_norm(r, p), 3.0, 1e-12);
  EXPECT_THROW(schatten_norm(r, 0.5), std::invalid_argument);
}

TEST(SchattenNorm, MatchesSingularValueOracle) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const CMatrix x = random_gaussian(4, rng);
    for (double p : {1.0, 1.5, 2.0, 3.0, 4.0, kInf}) EXPECT_NEAR(schatten_norm(x, p), oracle::schatten(x, p), 1e-10);
    const auto s = singular_values(x);
    const Eigen::VectorXd ref = oracle::singular_values(x);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], ref(static_cast<Eigen::Index>(i)), 1e-10);
  }
}

TEST(SchattenNorm, UnitaryInvariance) {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const CMatrix x = random_gaussian(4, rng);
    const CMatrix u = random_unitary(4, rng);
    const CMatrix v = random_unitary(4, rng);
    for (double p : {1.0, 2.0, 3.0, kInf}) EXPECT_NEAR(schatten_norm(u * x * v, p), schatten_norm(x, p), 1e-9);
  }
}

TEST(SchattenNorm, Holder) {
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const CMatrix x = random_gaussian(3, rng);
    const CMatrix y = random_gaussian(3, rng);
    for (double p : {1.0, 1.5, 2.0, 3.0, kInf}) {
      const double q = p == 1.0 ? kInf : (std::isinf(p) ? 1.0 : p / (p - 1.0));
      EXPECT_LE(std::abs(trace_inner(x, y)), schatten_norm(x, p) * schatten_norm(y, q) + 1e-9);
    }
  }
}

TEST(PsdMinEig, Examples) {
  EXPECT_NEAR(psd_min_eig(CMatrix::diagonal({0.0, 5.0})), 0.0, 1e-14);
  EXPECT_NEAR(psd_min_eig(CMatrix::identity(2) * -1.0), -1.0, 1e-14);
  Rng rng(14);
  for (int t = 0; t < 20; ++t) {
    const CMatrix a = random_gaussian(5, rng);
    EXPECT_GE(psd_min_eig(a.adjoint() * a), -1e-12);
  }
}

TEST(RandomMatrices, UnitaryAndDeterministic) {
  Rng a(99), b(99);
  const CMatrix u = random_unitary(6, a);
  EXPECT_LT(max_abs_diff(u.adjoint() * u, CMatrix::identity(6)), 1e-12);
  EXPECT_EQ(u, random_unitary(6, b));
  EXPECT_LT(hermitian_defect(random_hermitian(4, a)), 1e-15);
}

TEST(Rng, CounterBasedAndPortable) {
  Rng r(0);
  // SplitMix64 reference outputs for seed 0.
  EXPECT_EQ(r.next_u64(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(r.next_u64(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(r.counter(), 2u);
  Rng s(0);
  double m = 0.0, v = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const cplx z = s.complex_normal();
    m += z.real();
    v += std::norm(z);
  }
  EXPECT_NEAR(m / n, 0.0, 0.03);
  EXPECT_NEAR(v / n, 1.0, 0.03);
  EXPECT_NE(trial_seed(1, 0), trial_seed(1, 1));
}

TEST(BlockDiag, Layout) {
  const CMatrix x = CMatrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  const CMatrix y = CMatrix::scalar(5.0);
  const CMatrix z = block_diag(x, y);
  EXPECT_EQ(z.dim(), 3u);
  EXPECT_EQ(z(1, 0), cplx(3.0));
  EXPECT_EQ(z(2, 2), cplx(5.0));
  EXPECT_EQ(z(0, 2), cplx(0.0));
}
