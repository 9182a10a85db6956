// Copyright 2026 The DiRotQ Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dirotq/linalg.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace dirotq {
namespace {

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  const Matrix g = gaussian_matrix(n, n, seed, 1.0);
  return 0.5 * (g + transpose(g));
}

double orthogonality_defect(const Matrix& q) {
  return max_abs_diff(matmul(transpose(q), q), Matrix::identity(q.cols()));
}

Matrix reconstruct(const EigenDecomposition& e) {
  Matrix scaled = e.vectors;
  for (std::size_t r = 0; r < scaled.rows(); ++r)
    for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) *= e.values[c];
  return matmul(scaled, transpose(e.vectors));
}

TEST(MatrixTest, FromDataRejectsWrongLength) {
  EXPECT_THROW(Matrix::from_data(2, 2, {1, 2, 3}), ShapeError);
}

TEST(MatrixTest, FromDataRejectsNonFinite) {
  EXPECT_THROW(
      Matrix::from_data(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}),
      NumericalError);
  EXPECT_THROW(
      Matrix::from_data(1, 2, {std::numeric_limits<double>::infinity(), 0.0}),
      NumericalError);
}

TEST(MatmulTest, IdentityIsNeutral) {
  const Matrix a = gaussian_matrix(3, 5, 1, 1.0);
  EXPECT_EQ(matmul(Matrix::identity(3), a), a);
}

TEST(MatmulTest, HandExpansion) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{0}, {1}});
  EXPECT_EQ(matmul(a, b), Matrix::from_rows({{2}, {4}}));
}

TEST(MatmulTest, MatchesTripleLoopOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = gaussian_matrix(8, 8, derive_seed(seed, 1), 1.0);
    const Matrix b = gaussian_matrix(8, 8, derive_seed(seed, 2), 1.0);
    const Matrix ref = oracle::triple_loop_matmul(a, b);
    EXPECT_LT(relative_frobenius_error(ref, matmul(a, b)), 1e-12);
  }
}

TEST(MatmulTest, RejectsMismatchWithBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(4, 5));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("4x5"), std::string::npos) << msg;
  }
}

TEST(MatmulTest, AssociativeWithinTolerance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = gaussian_matrix(7, 9, derive_seed(seed, 1), 1.0);
    const Matrix b = gaussian_matrix(9, 4, derive_seed(seed, 2), 1.0);
    const Matrix c = gaussian_matrix(4, 6, derive_seed(seed, 3), 1.0);
    EXPECT_LT(relative_frobenius_error(matmul(matmul(a, b), c),
                                       matmul(a, matmul(b, c))),
              1e-10);
  }
}

TEST(MatmulTest, Deterministic) {
  const Matrix a = gaussian_matrix(17, 13, 5, 1.0);
  const Matrix b = gaussian_matrix(13, 11, 6, 1.0);
  EXPECT_EQ(matmul(a, b), matmul(a, b));
}

TEST(GramTest, MatchesTransposeProduct) {
  const Matrix a = gaussian_matrix(20, 6, 3, 1.0);
  const Matrix ref = oracle::triple_loop_matmul(transpose(a), a);
  EXPECT_LT(relative_frobenius_error(ref, gram(a)), 1e-13);
  const Matrix g = gram(a);
  EXPECT_EQ(g, transpose(g));
}

TEST(SliceTest, ColumnAndRowSlicesRoundTrip) {
  const Matrix a = gaussian_matrix(5, 7, 9, 1.0);
  EXPECT_EQ(hstack(column_slice(a, 0, 3), column_slice(a, 3, 7)), a);
  EXPECT_EQ(vstack(row_slice(a, 0, 2), row_slice(a, 2, 5)), a);
  EXPECT_THROW(column_slice(a, 4, 8), ShapeError);
}

class EighTest : public ::testing::TestWithParam<EigenMethod> {
 protected:
  EighOptions opts() const {
    EighOptions o;
    o.method = GetParam();
    return o;
  }
};

TEST_P(EighTest, DiagonalCase) {
  const auto e = eigh_descending(Matrix::from_rows({{2, 0}, {0, 1}}), opts());
  EXPECT_DOUBLE_EQ(e.values[0], 2.0);
  EXPECT_DOUBLE_EQ(e.values[1], 1.0);
  EXPECT_NEAR(std::abs(e.vectors(0, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(e.vectors(1, 1)), 1.0, 1e-15);
}

TEST_P(EighTest, RankOneCase) {
  const auto e = eigh_descending(Matrix::from_rows({{1, 1}, {1, 1}}), opts());
  EXPECT_NEAR(e.values[0], 2.0, 1e-14);
  EXPECT_NEAR(e.values[1], 0.0, 1e-14);
  EXPECT_NEAR(e.vectors(0, 0), 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(e.vectors(1, 0), 1.0 / std::sqrt(2.0), 1e-14);
}

TEST_P(EighTest, RandomSymmetricInvariants) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Matrix s = random_symmetric(16, derive_seed(seed, 77));
    const auto e = eigh_descending(s, opts());
    EXPECT_LT(relative_frobenius_error(s, reconstruct(e)), 1e-10);
    EXPECT_LT(orthogonality_defect(e.vectors), 1e-6);
    double trace = 0.0, sum = 0.0;
    for (std::size_t i = 0; i < 16; ++i) {
      trace += s(i, i);
      sum += e.values[i];
      if (i > 0) {
        EXPECT_GE(e.values[i - 1], e.values[i]);
      }
    }
    EXPECT_NEAR(sum, trace, 1e-8 * std::max(1.0, std::abs(trace)));
  }
}

TEST_P(EighTest, SignConventionLargestEntryPositive) {
  const auto e = eigh_descending(random_symmetric(12, 4), opts());
  for (std::size_t c = 0; c < 12; ++c) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < 12; ++r)
      if (std::abs(e.vectors(r, c)) > std::abs(e.vectors(best, c))) best = r;
    EXPECT_GT(e.vectors(best, c), 0.0);
  }
}

// Eigenvalues fixed by construction (Q·diag(λ)·Qᵀ with Q orthonormalized by
// Gram-Schmidt) and recovered independently by power iteration.
TEST_P(EighTest, MatchesPowerIterationOracle) {
  const std::size_t n = 16;
  Matrix q = gaussian_matrix(n, n, 2024, 1.0);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) dot += q(r, c) * q(r, p);
      for (std::size_t r = 0; r < n; ++r) q(r, c) -= dot * q(r, p);
    }
    double norm = 0.0;
    for (std::size_t r = 0; r < n; ++r) norm += q(r, c) * q(r, c);
    for (std::size_t r = 0; r < n; ++r) q(r, c) /= std::sqrt(norm);
  }
  std::vector<double> lambda(n);
  for (std::size_t i = 0; i < n; ++i) lambda[i] = 10.0 * std::pow(0.7, i);
  Matrix scaled = q;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) scaled(r, c) *= lambda[c];
  const Matrix s = oracle::triple_loop_matmul(scaled, transpose(q));

  const auto oracle_values = oracle::power_iteration_eigenvalues(s);
  const auto e = eigh_descending(s, opts());
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(e.values[i], oracle_values[i], 1e-8) << "index " << i;
    EXPECT_NEAR(e.values[i], lambda[i], 1e-10) << "index " << i;
  }
}

TEST_P(EighTest, RejectsNonSquare) {
  EXPECT_THROW(eigh_descending(Matrix(2, 3), opts()), ShapeError);
}

TEST_P(EighTest, RepeatedEigenvaluesStillOrthonormal) {
  const auto e = eigh_descending(Matrix::identity(6), opts());
  EXPECT_LT(orthogonality_defect(e.vectors), 1e-12);
  for (double v : e.values) EXPECT_DOUBLE_EQ(v, 1.0);
}

INSTANTIATE_TEST_SUITE_P(Methods, EighTest,
                         ::testing::Values(EigenMethod::tridiagonal_ql,
                                           EigenMethod::jacobi),
                         [](const auto& info) {
                           return info.param == EigenMethod::jacobi
                                      ? std::string("Jacobi")
                                      : std::string("TridiagonalQL");
                         });

TEST(EighCrossCheck, SolversAgreeOnSpectrum) {
  const Matrix s = random_symmetric(40, 99);
  EighOptions ql, jac;
  jac.method = EigenMethod::jacobi;
  const auto a = eigh_descending(s, ql);
  const auto b = eigh_descending(s, jac);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-10);
}

TEST(EighCrossCheck, JacobiIterationCapReportsResidual) {
  EighOptions o;
  o.method = EigenMethod::jacobi;
  o.max_sweeps = 0;
  try {
    eigh_descending(random_symmetric(8, 1), o);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(RandomOrthogonalTest, DimOneIsPlusOrMinusOne) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Matrix r = random_orthogonal(1, seed);
    EXPECT_DOUBLE_EQ(std::abs(r(0, 0)), 1.0);
  }
}

TEST(RandomOrthogonalTest, DeterministicPerSeed) {
  EXPECT_EQ(random_orthogonal(32, 5), random_orthogonal(32, 5));
}

TEST(RandomOrthogonalTest, Dim64Seed7OrthogonalWithUnitDeterminant) {
  const Matrix r = random_orthogonal(64, 7);
  EXPECT_LT(orthogonality_defect(r), 1e-6);
  EXPECT_NEAR(std::abs(oracle::lu_determinant(r)), 1.0, 1e-4);
}

TEST(RandomOrthogonalTest, ColumnNormsAndSeedSensitivity) {
  const Matrix a = random_orthogonal(16, 1);
  const Matrix b = random_orthogonal(16, 2);
  for (std::size_t c = 0; c < 16; ++c) {
    double norm = 0.0;
    for (std::size_t r = 0; r < 16; ++r) norm += a(r, c) * a(r, c);
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-6);
  }
  EXPECT_GT(max_abs_diff(a, b), 1e-3);
}

TEST(RandomOrthogonalTest, RejectsDimZero) {
  EXPECT_THROW(random_orthogonal(0, 1), ConfigError);
}

TEST(HouseholderQrTest, ReconstructsWithTriangularFactor) {
  const Matrix g = gaussian_matrix(10, 10, 8, 1.0);
  const QrResult qr = householder_qr(g);
  EXPECT_LT(relative_frobenius_error(g, matmul(qr.q, qr.r)), 1e-13);
  EXPECT_LT(orthogonality_defect(qr.q), 1e-12);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < i; ++j) EXPECT_EQ(qr.r(i, j), 0.0);
}

TEST(CholeskyTest, ReconstructsSpdMatrix) {
  const Matrix a = gaussian_matrix(30, 8, 12, 1.0);
  const Matrix h = gram(a);
  const Matrix l = cholesky_lower(h);
  EXPECT_LT(relative_frobenius_error(h, matmul(l, transpose(l))), 1e-13);
  const Matrix inv = spd_inverse(h);
  EXPECT_LT(max_abs_diff(matmul(h, inv), Matrix::identity(8)), 1e-9);
  EXPECT_EQ(inv, transpose(inv));
}

TEST(CholeskyTest, FailureNamesPivot) {
  const Matrix bad = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, -1}});
  try {
    cholesky_lower(bad);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("pivot 2"), std::string::npos)
        << e.what();
  }
}

}  // namespace
}  // namespace dirotq
