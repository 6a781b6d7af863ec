#pragma once

#include <complex>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ctkrylov/analysis.hpp"
#include "ctkrylov/errors.hpp"
#include "ctkrylov/solvers.hpp"
#include "ctkrylov/sparse.hpp"

namespace ctkrylov {

namespace detail {

inline std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("csv: cannot open " + path);
  return out;
}

inline std::string field_or_nan(const Vector& v, std::size_t i) {
  return i < v.size() ? fmt17(v[i]) : "nan";
}

}  // namespace detail

/// One row per iteration; fields that a run did not produce are "nan".
inline void write_trace_csv(const SolverTrace& trace, const std::string& path) {
  auto out = detail::open_csv(path);
  out << "k,true_resnorm,inner_resnorm,errnorm,stop_flag,dp_lhs,dp_rhs,"
         "ncp_distance\n";
  for (std::size_t i = 0; i < trace.iterations(); ++i) {
    const std::size_t k = i + 1;
    const bool stopped = trace.stop_index && *trace.stop_index == k;
    out << k << "," << detail::fmt17(trace.true_resnorms[i]) << ","
        << detail::fmt17(trace.inner_resnorms[i]) << ","
        << detail::field_or_nan(trace.errnorms, i) << "," << (stopped ? 1 : 0)
        << "," << detail::field_or_nan(trace.dp_lhs, i) << ","
        << detail::field_or_nan(trace.dp_rhs, i) << ","
        << detail::field_or_nan(trace.ncp_distances, i) << "\n";
  }
  if (!out) throw IoError("csv: write failure on " + path);
}

inline void write_picard_csv(const SpectralReport& rep,
                             const std::string& path) {
  auto out = detail::open_csv(path);
  out << "i,sigma,picard_exact,picard_noisy\n";
  for (std::size_t i = 0; i < rep.sigma.size(); ++i)
    out << (i + 1) << "," << detail::fmt17(rep.sigma[i]) << ","
        << detail::fmt17(rep.picard_exact[i]) << ","
        << detail::fmt17(rep.picard_noisy[i]) << "\n";
  if (!out) throw IoError("csv: write failure on " + path);
}

inline void write_spectrum_csv(const SpectrumSummary& s,
                               const std::string& path) {
  auto out = detail::open_csv(path);
  out << "re,im\n";
  for (const auto& z : s.eigenvalues)
    out << detail::fmt17(z.real()) << "," << detail::fmt17(z.imag()) << "\n";
  if (!out) throw IoError("csv: write failure on " + path);
}

struct BoundRow {
  double epsilon;
  double observed;
  double bound;
};

inline void write_bound_csv(const std::vector<BoundRow>& rows,
                            const std::string& path) {
  auto out = detail::open_csv(path);
  out << "epsilon,observed,bound\n";
  for (const BoundRow& r : rows)
    out << detail::fmt17(r.epsilon) << "," << detail::fmt17(r.observed) << ","
        << detail::fmt17(r.bound) << "\n";
  if (!out) throw IoError("csv: write failure on " + path);
}

struct SweepRow {
  double tau;
  double unmatchedness;
  double noise_level;
  std::size_t k_min;
  double err_min;
};

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            const std::string& path) {
  auto out = detail::open_csv(path);
  out << "tau,unmatchedness,noise_level,k_min,err_min\n";
  for (const SweepRow& r : rows)
    out << detail::fmt17(r.tau) << "," << detail::fmt17(r.unmatchedness) << ","
        << detail::fmt17(r.noise_level) << "," << r.k_min << ","
        << detail::fmt17(r.err_min) << "\n";
  if (!out) throw IoError("csv: write failure on " + path);
}

struct MatrixSummaryRow {
  std::string model;
  std::string file;
  std::size_t rows;
  std::size_t cols;
  std::size_t nnz;
  double sparsity;
};

inline void write_matrix_summary_csv(const std::vector<MatrixSummaryRow>& rows,
                                     const std::string& path) {
  auto out = detail::open_csv(path);
  out << "model,file,rows,cols,nnz,sparsity\n";
  for (const MatrixSummaryRow& r : rows)
    out << r.model << "," << r.file << "," << r.rows << "," << r.cols << ","
        << r.nnz << "," << detail::fmt17(r.sparsity) << "\n";
  if (!out) throw IoError("csv: write failure on " + path);
}

/// Columns: index, singular value, |v_i^T xbar|, then one column per
/// requested iteration k.
inline void write_coeffs_csv(const Vector& sigma, const Vector& exact_coeffs,
                             const std::map<std::size_t, Vector>& per_iterate,
                             const std::string& path) {
  auto out = detail::open_csv(path);
  out << "i,sigma,exact";
  for (const auto& [k, coeffs] : per_iterate) out << ",k" << k;
  out << "\n";
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    out << (i + 1) << "," << detail::fmt17(sigma[i]) << ","
        << detail::fmt17(exact_coeffs[i]);
    for (const auto& [k, coeffs] : per_iterate)
      out << "," << detail::fmt17(coeffs[i]);
    out << "\n";
  }
  if (!out) throw IoError("csv: write failure on " + path);
}

}  // namespace ctkrylov
