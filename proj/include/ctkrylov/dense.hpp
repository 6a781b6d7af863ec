#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <lapacke.h>

#include "ctkrylov/errors.hpp"
#include "ctkrylov/sparse.hpp"

namespace ctkrylov {

/// Row-major dense matrix for the desk-scale spectral analyses.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;  // row-major, length rows * cols

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a[i * cols + j];
  }
};

inline DenseMatrix densify(const SparseMatrix& m) {
  DenseMatrix d(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
      d(i, m.col_indices[k]) = m.values[k];
  return d;
}

inline DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

inline Vector matvec(const DenseMatrix& m, const Vector& x) {
  if (x.size() != m.cols) throw NumericalError("dense matvec: dimension mismatch");
  Vector y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw NumericalError("matmul: dimension mismatch");
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline double frob_norm(const DenseMatrix& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

/// Thin SVD, M = U diag(sigma) V^T with U (m x k), V (n x k), k = min(m, n),
/// singular values nonincreasing.
struct SvdResult {
  DenseMatrix U;
  Vector sigma;
  DenseMatrix V;
};

constexpr std::size_t kDefaultSvdElementCap = 50'000'000;
constexpr std::size_t kDefaultEigDimCap = 4096;

inline SvdResult dense_svd(const DenseMatrix& m,
                           std::size_t element_cap = kDefaultSvdElementCap) {
  if (m.rows * m.cols > element_cap)
    throw NumericalError(
        "dense_svd: matrix has " + std::to_string(m.rows * m.cols) +
        " elements, above the desk-scale cap of " + std::to_string(element_cap) +
        "; use a smaller problem size");
  const lapack_int mr = static_cast<lapack_int>(m.rows);
  const lapack_int nc = static_cast<lapack_int>(m.cols);
  const lapack_int k = std::min(mr, nc);
  SvdResult out;
  out.U = DenseMatrix(m.rows, static_cast<std::size_t>(k));
  out.sigma.assign(static_cast<std::size_t>(k), 0.0);
  DenseMatrix vt(static_cast<std::size_t>(k), m.cols);
  std::vector<double> work = m.a;  // dgesdd destroys its input
  const lapack_int info = LAPACKE_dgesdd(
      LAPACK_ROW_MAJOR, 'S', mr, nc, work.data(), nc, out.sigma.data(),
      out.U.a.data(), k, vt.a.data(), nc);
  if (info != 0)
    throw NumericalError("dense_svd: LAPACK dgesdd failed with info=" +
                         std::to_string(info));
  out.V = transpose(vt);
  return out;
}

/// All eigenvalues of a general (nonsymmetric) square matrix.
inline std::vector<std::complex<double>> dense_eig(
    const DenseMatrix& m, std::size_t dim_cap = kDefaultEigDimCap) {
  if (m.rows != m.cols)
    throw NumericalError("dense_eig: matrix is not square");
  if (m.rows > dim_cap)
    throw NumericalError("dense_eig: dimension " + std::to_string(m.rows) +
                         " exceeds the desk-scale cap of " +
                         std::to_string(dim_cap));
  const lapack_int n = static_cast<lapack_int>(m.rows);
  std::vector<double> work = m.a;
  std::vector<double> wr(m.rows), wi(m.rows);
  // The row-major LAPACKE wrapper insists on ldvl/ldvr >= n even when the
  // eigenvectors are not requested.
  const lapack_int info =
      LAPACKE_dgeev(LAPACK_ROW_MAJOR, 'N', 'N', n, work.data(), n, wr.data(),
                    wi.data(), nullptr, n, nullptr, n);
  if (info != 0)
    throw NumericalError("dense_eig: LAPACK dgeev failed with info=" +
                         std::to_string(info) +
                         (info > 0 ? " (QR iteration did not converge)" : ""));
  std::vector<std::complex<double>> eig(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) eig[i] = {wr[i], wi[i]};
  return eig;
}

}  // namespace ctkrylov
