#pragma once

// Deterministic dense linear-algebra substrate: SVD with fixed ordering and
// sign conventions, Moore-Penrose pseudo-inverse, singular-value
// soft-thresholding, orthonormal embeddings, and CSV matrix IO.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eufm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Throws std::invalid_argument if any entry of m is NaN/Inf.
inline void require_finite(const Matrix& m, const std::string& what = "matrix") {
  if (!m.allFinite()) throw std::invalid_argument("non-finite " + what);
}

/// Full SVD factors with s non-increasing and a fixed sign convention:
/// in each column of u the entry of largest absolute value is non-negative
/// (ties broken by lowest row index).
struct SvdFactors {
  Matrix u;  // rows x rows, orthogonal
  Vector s;  // min(rows, cols), non-increasing, non-negative
  Matrix v;  // cols x cols, orthogonal
};

/// Full SVD with descending singular values and the deterministic sign
/// convention above. Deterministic for identical input bits.
inline SvdFactors svd_desc(const Matrix& m) {
  require_finite(m);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdFactors f{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  const Index r = f.s.size();
  for (Index j = 0; j < f.u.cols(); ++j) {
    Index imax = 0;
    for (Index i = 1; i < f.u.rows(); ++i)
      if (std::abs(f.u(i, j)) > std::abs(f.u(imax, j))) imax = i;
    if (f.u(imax, j) < 0.0) {
      f.u.col(j) = -f.u.col(j);
      if (j < r && j < f.v.cols()) f.v.col(j) = -f.v.col(j);
    }
  }
  return f;
}

/// Reconstructs u * diag(s) * v^T from full factors.
inline Matrix svd_reconstruct(const SvdFactors& f) {
  const Index r = f.s.size();
  return f.u.leftCols(r) * f.s.asDiagonal() * f.v.leftCols(r).transpose();
}

/// Moore-Penrose pseudo-inverse: inverts singular values s_i > rel_tol * s_max,
/// zeros the rest.
inline Matrix pinv(const Matrix& m, double rel_tol = 1e-10) {
  if (!(rel_tol > 0.0)) throw std::invalid_argument("pinv: rel_tol must be > 0");
  const SvdFactors f = svd_desc(m);
  const double smax = f.s.size() > 0 ? f.s(0) : 0.0;
  Vector inv = Vector::Zero(f.s.size());
  for (Index i = 0; i < f.s.size(); ++i)
    if (f.s(i) > rel_tol * smax) inv(i) = 1.0 / f.s(i);
  const Index r = f.s.size();
  return f.v.leftCols(r) * inv.asDiagonal() * f.u.leftCols(r).transpose();
}

/// Singular-value soft-thresholding: U * (diag(s) - tau I)_+ * V^T.
/// The unique minimizer of (1/2)‖Z − m‖²_F + τ‖Z‖_*.
inline Matrix svt(const Matrix& m, double tau) {
  if (tau < 0.0) throw std::invalid_argument("svt: negative threshold");
  const SvdFactors f = svd_desc(m);
  Vector shrunk = (f.s.array() - tau).max(0.0).matrix();
  const Index r = f.s.size();
  return f.u.leftCols(r) * shrunk.asDiagonal() * f.v.leftCols(r).transpose();
}

/// d x k matrix whose columns are the first k standard basis vectors.
inline Matrix orthonormal_embed(Index k, Index d) {
  if (k > d) throw std::invalid_argument("orthonormal_embed: k > d");
  return Matrix::Identity(d, k);
}

/// Writes m as CSV (one row per line, 17 significant digits).
inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Reads a CSV matrix written by write_matrix_csv; dimensions inferred.
/// Ragged rows or non-numeric fields are errors.
inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("non-numeric CSV field '" + cell + "' at row " +
                                 std::to_string(lineno) + ", column " +
                                 std::to_string(row.size() + 1) + " in " + path.string());
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV row " + std::to_string(lineno) + " in " + path.string());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty CSV matrix: " + path.string());
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  require_finite(m, "CSV matrix");
  return m;
}

}  // namespace eufm
