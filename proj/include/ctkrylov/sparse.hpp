#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ctkrylov/errors.hpp"
#include "ctkrylov/parallel.hpp"

namespace ctkrylov {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Small dense-vector kernels shared by the solvers.
// ---------------------------------------------------------------------------

inline double dot(const Vector& x, const Vector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vector& x) { return std::sqrt(dot(x, x)); }

inline void axpy(double alpha, const Vector& x, Vector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, Vector& x) {
  for (double& v : x) v *= alpha;
}

inline Vector subtract(const Vector& x, const Vector& y) {
  Vector r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[i] - y[i];
  return r;
}

inline bool all_finite(const Vector& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Compressed sparse row matrix.
// ---------------------------------------------------------------------------

/// CSR matrix in canonical form: row_offsets nondecreasing, column indices
/// strictly increasing within each row, all values finite. Immutable after
/// construction and safe to share across threads.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets;  // length rows + 1
  std::vector<std::size_t> col_indices;  // length nnz
  std::vector<double> values;            // length nnz

  std::size_t nnz() const { return values.size(); }

  double sparsity() const {
    const double total = static_cast<double>(rows) * static_cast<double>(cols);
    return total == 0.0 ? 0.0 : 1.0 - static_cast<double>(nnz()) / total;
  }
};

/// Verifies the CSR invariants; throws NumericalError on violation.
inline void validate(const SparseMatrix& m, const char* what = "matrix") {
  const std::string tag(what);
  if (m.row_offsets.size() != m.rows + 1)
    throw NumericalError(tag + ": row_offsets length mismatch");
  if (m.row_offsets.front() != 0 || m.row_offsets.back() != m.nnz())
    throw NumericalError(tag + ": row_offsets endpoints invalid");
  if (m.col_indices.size() != m.values.size())
    throw NumericalError(tag + ": col/value length mismatch");
  for (std::size_t i = 0; i < m.rows; ++i) {
    if (m.row_offsets[i] > m.row_offsets[i + 1])
      throw NumericalError(tag + ": row_offsets not nondecreasing");
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      if (m.col_indices[k] >= m.cols)
        throw NumericalError(tag + ": column index out of range");
      if (k > m.row_offsets[i] && m.col_indices[k - 1] >= m.col_indices[k])
        throw NumericalError(tag + ": columns not strictly increasing in row " +
                             std::to_string(i));
      if (!std::isfinite(m.values[k]))
        throw NumericalError(tag + ": non-finite entry in row " +
                             std::to_string(i));
    }
  }
}

/// One (row, col, value) entry used during assembly.
struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Builds canonical CSR from arbitrary triplets: entries are sorted,
/// duplicates summed, and exact zeros dropped.
inline SparseMatrix csr_from_triplets(std::size_t rows, std::size_t cols,
                                      std::vector<Triplet> entries) {
  for (const Triplet& t : entries) {
    if (t.row >= rows || t.col >= cols)
      throw NumericalError("csr_from_triplets: entry out of bounds");
    if (!std::isfinite(t.value))
      throw NumericalError("csr_from_triplets: non-finite entry value");
  }
  std::sort(entries.begin(), entries.end(),
            [](const Triplet& a, const Triplet& b) {
              return std::tie(a.row, a.col) < std::tie(b.row, b.col);
            });
  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_offsets.assign(rows + 1, 0);
  m.col_indices.reserve(entries.size());
  m.values.reserve(entries.size());
  std::size_t i = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    while (i < entries.size() && entries[i].row == r) {
      double v = entries[i].value;
      const std::size_t c = entries[i].col;
      ++i;
      while (i < entries.size() && entries[i].row == r && entries[i].col == c) {
        v += entries[i].value;
        ++i;
      }
      if (v != 0.0) {
        m.col_indices.push_back(c);
        m.values.push_back(v);
      }
    }
    m.row_offsets[r + 1] = m.col_indices.size();
  }
  return m;
}

/// y = M x. Row-parallel; each row is summed sequentially in ascending
/// column order, so the result is identical for every thread count.
inline Vector matvec(const SparseMatrix& m, const Vector& x) {
  if (x.size() != m.cols)
    throw NumericalError("matvec: dimension mismatch (" +
                         std::to_string(x.size()) + " vs " +
                         std::to_string(m.cols) + " cols)");
  Vector y(m.rows, 0.0);
  std::atomic<std::size_t> bad_row{m.rows};  // sentinel: no bad row
  parallel_for(0, m.rows, [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
      s += m.values[k] * x[m.col_indices[k]];
    if (!std::isfinite(s)) bad_row.store(i);
    y[i] = s;
  });
  if (bad_row.load() != m.rows)
    throw NumericalError("matvec: non-finite result in row " +
                         std::to_string(bad_row.load()));
  return y;
}

/// Exact structural transpose; output is canonical CSR.
inline SparseMatrix transpose(const SparseMatrix& m) {
  SparseMatrix t;
  t.rows = m.cols;
  t.cols = m.rows;
  t.row_offsets.assign(m.cols + 1, 0);
  for (std::size_t c : m.col_indices) ++t.row_offsets[c + 1];
  for (std::size_t i = 0; i < m.cols; ++i)
    t.row_offsets[i + 1] += t.row_offsets[i];
  t.col_indices.resize(m.nnz());
  t.values.resize(m.nnz());
  std::vector<std::size_t> cursor(t.row_offsets.begin(),
                                  t.row_offsets.end() - 1);
  // Scanning rows in order makes the output columns strictly increasing.
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k) {
      const std::size_t pos = cursor[m.col_indices[k]]++;
      t.col_indices[pos] = i;
      t.values[pos] = m.values[k];
    }
  }
  return t;
}

inline double frob_norm(const SparseMatrix& m) {
  double s = 0.0;
  for (double v : m.values) s += v * v;
  return std::sqrt(s);
}

/// ||a - b||_F by merged traversal of the two sparsity patterns.
inline double frob_diff(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw NumericalError("frob_diff: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    std::size_t ka = a.row_offsets[i], kb = b.row_offsets[i];
    const std::size_t ea = a.row_offsets[i + 1], eb = b.row_offsets[i + 1];
    while (ka < ea || kb < eb) {
      double d;
      if (kb >= eb || (ka < ea && a.col_indices[ka] < b.col_indices[kb])) {
        d = a.values[ka++];
      } else if (ka >= ea || b.col_indices[kb] < a.col_indices[ka]) {
        d = -b.values[kb++];
      } else {
        d = a.values[ka++] - b.values[kb++];
      }
      s += d * d;
    }
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Matrix Market coordinate format, real general, 1-based indices.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void mm_write(const SparseMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("mm_write: cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows << " " << m.cols << " " << m.nnz() << "\n";
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t k = m.row_offsets[i]; k < m.row_offsets[i + 1]; ++k)
      out << (i + 1) << " " << (m.col_indices[k] + 1) << " "
          << detail::fmt17(m.values[k]) << "\n";
  if (!out) throw IoError("mm_write: write failure on " + path);
}

inline SparseMatrix mm_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("mm_read: cannot open " + path);
  auto fail = [&path](std::size_t line, const std::string& why) {
    throw IoError("mm_read: " + path + ":" + std::to_string(line) + ": " +
                  why);
  };
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) fail(1, "missing header");
  ++lineno;
  if (line.rfind("%%MatrixMarket", 0) != 0 ||
      line.find("matrix") == std::string::npos ||
      line.find("coordinate") == std::string::npos ||
      line.find("real") == std::string::npos ||
      line.find("general") == std::string::npos)
    fail(lineno, "unsupported or malformed header: " + line);
  // Comments are only legal between the banner and the size line.
  std::size_t rows = 0, cols = 0, count = 0;
  for (;;) {
    if (!std::getline(in, line)) fail(lineno + 1, "missing size line");
    ++lineno;
    if (!line.empty() && line[0] == '%') continue;
    std::istringstream ss(line);
    long long r, c, n;
    if (!(ss >> r >> c >> n) || r < 0 || c < 0 || n < 0)
      fail(lineno, "malformed size line: " + line);
    std::string extra;
    if (ss >> extra) fail(lineno, "trailing tokens on size line");
    rows = static_cast<std::size_t>(r);
    cols = static_cast<std::size_t>(c);
    count = static_cast<std::size_t>(n);
    break;
  }
  std::vector<Triplet> entries;
  entries.reserve(count);
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long long r, c;
    double v;
    if (!(ss >> r >> c >> v)) fail(lineno, "non-numeric entry: " + line);
    if (r < 1 || static_cast<std::size_t>(r) > rows) fail(lineno, "row index out of bounds");
    if (c < 1 || static_cast<std::size_t>(c) > cols) fail(lineno, "column index out of bounds");
    if (entries.size() == count) fail(lineno, "more entries than the size line declares");
    entries.push_back({static_cast<std::size_t>(r - 1),
                       static_cast<std::size_t>(c - 1), v});
  }
  if (entries.size() != count)
    throw IoError("mm_read: " + path + ": expected " + std::to_string(count) +
                  " entries, found " + std::to_string(entries.size()));
  // Duplicate coordinates would silently sum; reject them instead.
  std::vector<Triplet> sorted = entries;
  std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i - 1].row == sorted[i].row && sorted[i - 1].col == sorted[i].col)
      throw IoError("mm_read: " + path + ": duplicate coordinate (" +
                    std::to_string(sorted[i].row + 1) + ", " +
                    std::to_string(sorted[i].col + 1) + ")");
  SparseMatrix m = csr_from_triplets(rows, cols, std::move(entries));
  validate(m, path.c_str());
  return m;
}

}  // namespace ctkrylov
