#include "eufm/linalg.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace {

using eufm::Index;
using eufm::Matrix;
using eufm::Vector;

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

// Independent 2x2 singular-value oracle: eigenvalues of M M^T in closed form.
std::array<double, 2> singulars_2x2(const Matrix& m) {
  const Matrix mmt = m * m.transpose();
  const double tr = mmt(0, 0) + mmt(1, 1);
  const double det = mmt(0, 0) * mmt(1, 1) - mmt(0, 1) * mmt(1, 0);
  const double disc = std::sqrt(std::max(tr * tr - 4.0 * det, 0.0));
  return {std::sqrt(0.5 * (tr + disc)), std::sqrt(std::max(0.5 * (tr - disc), 0.0))};
}

// The centered count-weighted label matrix for counts [3,1], built by hand so
// this file does not depend on the dataset module.
Matrix yhat_31() {
  Matrix y_tilde(2, 2);
  y_tilde << 0.25, -0.75, -0.25, 0.75;
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = std::sqrt(3.0);
  d(1, 1) = 1.0;
  return y_tilde * d;
}

void expect_svd_invariants(const Matrix& m, double rel_tol = 1e-10) {
  const eufm::SvdFactors f = eufm::svd_desc(m);
  for (Index i = 0; i + 1 < f.s.size(); ++i) EXPECT_GE(f.s(i), f.s(i + 1));
  if (f.s.size() > 0) EXPECT_GE(f.s(f.s.size() - 1), 0.0);
  EXPECT_LE((f.u.transpose() * f.u - Matrix::Identity(f.u.cols(), f.u.cols())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((f.v.transpose() * f.v - Matrix::Identity(f.v.cols(), f.v.cols())).cwiseAbs().maxCoeff(), 1e-12);
  const double denom = std::max(m.norm(), 1e-300);
  EXPECT_LE((eufm::svd_reconstruct(f) - m).norm() / denom, rel_tol);
  for (Index j = 0; j < f.u.cols(); ++j) {
    Index imax = 0;
    for (Index i = 1; i < f.u.rows(); ++i)
      if (std::abs(f.u(i, j)) > std::abs(f.u(imax, j))) imax = i;
    EXPECT_GE(f.u(imax, j), 0.0) << "sign convention violated in column " << j;
  }
}

TEST(SvdDesc, IdentityAndDiagonal) {
  const eufm::SvdFactors fi = eufm::svd_desc(Matrix::Identity(3, 3));
  ASSERT_EQ(fi.s.size(), 3);
  for (Index i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(fi.s(i), 1.0);

  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  const eufm::SvdFactors fd = eufm::svd_desc(d);
  EXPECT_DOUBLE_EQ(fd.s(0), 3.0);
  EXPECT_DOUBLE_EQ(fd.s(1), 1.0);
  EXPECT_LE((fd.u - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((fd.v - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(SvdDesc, CenteredLabelMatrixAgainstClosedFormOracle) {
  const Matrix yhat = yhat_31();
  const auto oracle = singulars_2x2(yhat);
  EXPECT_NEAR(oracle[0], std::sqrt(1.5), 1e-12);
  EXPECT_NEAR(oracle[1], 0.0, 1e-12);

  const eufm::SvdFactors f = eufm::svd_desc(yhat);
  EXPECT_NEAR(f.s(0), oracle[0], 1e-12);
  EXPECT_NEAR(f.s(1), oracle[1], 1e-12);
  expect_svd_invariants(yhat);
}

TEST(SvdDesc, InvariantsOnRandomShapes) {
  expect_svd_invariants(random_matrix(3, 3, 11));
  expect_svd_invariants(random_matrix(4, 2, 12));
  expect_svd_invariants(random_matrix(2, 5, 13));
  expect_svd_invariants(random_matrix(6, 6, 14));
}

TEST(SvdDesc, DeterministicForIdenticalInputs) {
  const Matrix m = random_matrix(5, 4, 21);
  const eufm::SvdFactors a = eufm::svd_desc(m);
  const eufm::SvdFactors b = eufm::svd_desc(m);
  EXPECT_TRUE((a.u.array() == b.u.array()).all());
  EXPECT_TRUE((a.s.array() == b.s.array()).all());
  EXPECT_TRUE((a.v.array() == b.v.array()).all());
}

TEST(SvdDesc, RejectsNonFinite) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(
      {
        try {
          eufm::svd_desc(m);
        } catch (const std::invalid_argument& e) {
          EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
          throw;
        }
      },
      std::invalid_argument);
}

TEST(Pinv, DiagonalAndIdentity) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 2.0;
  const Matrix p = eufm::pinv(d);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-14);
  EXPECT_NEAR(p(1, 1), 0.0, 1e-14);
  EXPECT_NEAR(p(0, 1), 0.0, 1e-14);

  const Matrix pi = eufm::pinv(Matrix::Identity(4, 4));
  EXPECT_LE((pi - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pinv, RankOneSatisfiesPenroseConditions) {
  Matrix m(2, 2);
  m << 1.0, 1.0, 1.0, 1.0;
  const Matrix p = eufm::pinv(m);
  EXPECT_LE((p - Matrix::Constant(2, 2, 0.25)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((m * p * m - m).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((p * m * p - p).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(((m * p).transpose() - m * p).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE(((p * m).transpose() - p * m).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pinv, PenroseConditionsOnRandomRectangular) {
  const Matrix m = random_matrix(4, 3, 31);
  const Matrix p = eufm::pinv(m);
  ASSERT_EQ(p.rows(), 3);
  ASSERT_EQ(p.cols(), 4);
  EXPECT_LE((m * p * m - m).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((p * m * p - p).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(((m * p).transpose() - m * p).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE(((p * m).transpose() - p * m).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pinv, ProjectorIsItsOwnPseudoInverse) {
  // P = Q Q^T with orthonormal Q columns is symmetric idempotent.
  const Matrix a = random_matrix(4, 2, 41);
  const Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = Matrix(qr.householderQ()).leftCols(2);
  const Matrix p = q * q.transpose();
  EXPECT_LE((eufm::pinv(p) - p).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Svt, DiagonalThresholdingAndNoOp) {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  const Matrix z = eufm::svt(d, 2.0);
  EXPECT_NEAR(z(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(z(1, 1), 0.0, 1e-14);

  const Matrix m = random_matrix(3, 3, 51);
  EXPECT_LE((eufm::svt(m, 0.0) - m).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(eufm::svt(m, -0.1), std::invalid_argument);
}

TEST(Svt, CenteredLabelMatrixShrinksTopSingularValue) {
  const Matrix z = eufm::svt(yhat_31(), 0.04);
  const eufm::SvdFactors f = eufm::svd_desc(z);
  EXPECT_NEAR(f.s(0), std::sqrt(1.5) - 0.04, 1e-12);
  EXPECT_NEAR(f.s(1), 0.0, 1e-12);
}

// Convex optimality of Z* = svt(m, tau) for (1/2)||Z - m||_F^2 + tau ||Z||_*:
// (m - Z*)/tau must be a nuclear-norm subgradient at Z*, i.e. its singular
// values are <= 1 + 1e-8 everywhere and = 1 on the support of Z*.
TEST(Svt, SubgradientOptimalityOnRandomMatrices) {
  for (double tau : {0.1, 1.0}) {
    for (std::uint64_t seed : {61u, 62u, 63u}) {
      const Matrix m = random_matrix(4, 4, seed);
      const Matrix z = eufm::svt(m, tau);
      const Matrix c = (m - z) / tau;
      const eufm::SvdFactors fc = eufm::svd_desc(c);
      const eufm::SvdFactors fz = eufm::svd_desc(z);
      Index support = 0;
      for (Index i = 0; i < fz.s.size(); ++i)
        if (fz.s(i) > 1e-12) ++support;
      for (Index i = 0; i < fc.s.size(); ++i) EXPECT_LE(fc.s(i), 1.0 + 1e-8);
      for (Index i = 0; i < support; ++i) EXPECT_NEAR(fc.s(i), 1.0, 1e-8);
    }
  }
}

TEST(OrthonormalEmbed, BasisColumns) {
  EXPECT_LE((eufm::orthonormal_embed(2, 2) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.0);
  const Matrix e13 = eufm::orthonormal_embed(1, 3);
  ASSERT_EQ(e13.rows(), 3);
  ASSERT_EQ(e13.cols(), 1);
  EXPECT_DOUBLE_EQ(e13(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(e13(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(e13(2, 0), 0.0);
  const Matrix e24 = eufm::orthonormal_embed(2, 4);
  EXPECT_LE((e24 - Matrix::Identity(4, 4).leftCols(2)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(eufm::orthonormal_embed(3, 2), std::invalid_argument);
}

TEST(MatrixCsv, RoundTripIsExact) {
  const auto path = std::filesystem::temp_directory_path() / "eufm_linalg_roundtrip.csv";
  const Matrix m = random_matrix(3, 4, 71) * 1e3;
  eufm::write_matrix_csv(path, m);
  const Matrix r = eufm::read_matrix_csv(path);
  ASSERT_EQ(r.rows(), m.rows());
  ASSERT_EQ(r.cols(), m.cols());
  EXPECT_TRUE((r.array() == m.array()).all()) << "17 significant digits must round-trip doubles";
  std::filesystem::remove(path);
}

TEST(MatrixCsv, ReportsBadFieldLocation) {
  const auto path = std::filesystem::temp_directory_path() / "eufm_linalg_bad.csv";
  {
    std::ofstream out(path);
    out << "1.0,2.0\n3.0,oops\n";
  }
  try {
    eufm::read_matrix_csv(path);
    FAIL() << "expected parse error";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
  }
  std::filesystem::remove(path);
}

TEST(MatrixCsv, RejectsRaggedRows) {
  const auto path = std::filesystem::temp_directory_path() / "eufm_linalg_ragged.csv";
  {
    std::ofstream out(path);
    out << "1.0,2.0\n3.0\n";
  }
  EXPECT_THROW(eufm::read_matrix_csv(path), std::runtime_error);
  std::filesystem::remove(path);
}

}  // namespace
