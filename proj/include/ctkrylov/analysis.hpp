#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ctkrylov/dense.hpp"
#include "ctkrylov/errors.hpp"
#include "ctkrylov/parallel.hpp"
#include "ctkrylov/projector.hpp"
#include "ctkrylov/solvers.hpp"
#include "ctkrylov/sparse.hpp"

namespace ctkrylov {

namespace detail {

constexpr double kRankCutoffRel = 1e-10;   // rank detection vs sigma_1
constexpr double kPinvCutoffRel = 1e-12;   // pseudoinverse truncation

inline std::size_t numeric_rank(const Vector& sigma) {
  if (sigma.empty() || sigma[0] <= 0.0) return 0;
  std::size_t r = 0;
  while (r < sigma.size() && sigma[r] > kRankCutoffRel * sigma[0]) ++r;
  return r;
}

/// First r columns of M as a dense matrix (orthonormal subspace basis).
inline DenseMatrix leading_columns(const DenseMatrix& m, std::size_t r) {
  DenseMatrix q(m.rows, r);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < r; ++j) q(i, j) = m(i, j);
  return q;
}

/// Sines of the principal angles between the column spans of two orthonormal
/// bases of equal dimension: singular values of (I - Q1 Q1^T) Q2.
inline Vector principal_angle_sines(const DenseMatrix& q1,
                                    const DenseMatrix& q2) {
  DenseMatrix cross = matmul(transpose(q1), q2);       // r x r
  DenseMatrix residual = matmul(q1, cross);            // n x r
  for (std::size_t i = 0; i < residual.rows; ++i)
    for (std::size_t j = 0; j < residual.cols; ++j)
      residual(i, j) = q2(i, j) - residual(i, j);
  Vector s = dense_svd(residual).sigma;
  for (double& v : s) v = std::min(v, 1.0);
  return s;
}

inline double max_principal_sine(const DenseMatrix& q1, const DenseMatrix& q2) {
  const Vector s = principal_angle_sines(q1, q2);
  return s.empty() ? 0.0 : s[0];
}

inline double spectral_norm(const DenseMatrix& m) {
  if (m.rows == 0 || m.cols == 0) return 0.0;
  const Vector s = dense_svd(m).sigma;
  return s.empty() ? 0.0 : s[0];
}

/// x = V diag(1/sigma) U^T y restricted to singular values above the cutoff.
inline Vector pinv_apply(const SvdResult& svd, const Vector& y) {
  const std::size_t k = svd.sigma.size();
  const double cut = k == 0 ? 0.0 : kPinvCutoffRel * svd.sigma[0];
  Vector t(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (svd.sigma[i] <= cut) break;
    double s = 0.0;
    for (std::size_t r = 0; r < svd.U.rows; ++r) s += svd.U(r, i) * y[r];
    t[i] = s / svd.sigma[i];
  }
  return matvec(svd.V, t);
}

/// Orthogonal projection of y onto the span of the first r columns of Q.
inline Vector project_onto(const DenseMatrix& q, std::size_t r,
                           const Vector& y) {
  Vector out(q.rows, 0.0);
  for (std::size_t j = 0; j < r; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < q.rows; ++i) c += q(i, j) * y[i];
    for (std::size_t i = 0; i < q.rows; ++i) out[i] += c * q(i, j);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Picard diagnostics and SVD coefficients of iterates.
// ---------------------------------------------------------------------------

/// Singular values together with the data's SVD coefficients, used to check
/// the discrete Picard condition and locate the noise floor.
struct SpectralReport {
  Vector sigma;         // nonincreasing
  Vector picard_exact;  // |u_i^T b_exact|
  Vector picard_noisy;  // |u_i^T b|
  std::size_t noise_floor_index = 0;  // first index of the flat region;
                                      // sigma.size() when no floor was found
  DenseMatrix V;  // right singular vectors, kept for iterate analysis
};

/// Window length for the median-based noise-floor locator.
constexpr std::size_t kNoiseFloorWindow = 200;

inline SpectralReport picard_report(const DenseMatrix& a,
                                    const Vector& b_exact, const Vector& b,
                                    std::size_t element_cap = kDefaultSvdElementCap) {
  if (b_exact.size() != a.rows || b.size() != a.rows)
    throw NumericalError("picard_report: data length mismatch");
  SvdResult svd = dense_svd(a, element_cap);
  SpectralReport rep;
  rep.sigma = svd.sigma;
  const std::size_t k = svd.sigma.size();
  rep.picard_exact.resize(k);
  rep.picard_noisy.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    double se = 0.0, sn = 0.0;
    for (std::size_t r = 0; r < a.rows; ++r) {
      se += svd.U(r, i) * b_exact[r];
      sn += svd.U(r, i) * b[r];
    }
    rep.picard_exact[i] = std::abs(se);
    rep.picard_noisy[i] = std::abs(sn);
  }
  // The flat region starts where the window medians of the noisy
  // coefficients stop decreasing.
  const std::size_t w = std::min(kNoiseFloorWindow, std::max<std::size_t>(k / 4, 1));
  rep.noise_floor_index = k;
  auto window_median = [&](std::size_t lo) {
    Vector tmp(rep.picard_noisy.begin() + lo, rep.picard_noisy.begin() + lo + w);
    std::nth_element(tmp.begin(), tmp.begin() + tmp.size() / 2, tmp.end());
    return tmp[tmp.size() / 2];
  };
  if (k >= 2 * w) {
    double prev = window_median(0);
    for (std::size_t lo = w; lo + w <= k; lo += w) {
      const double med = window_median(lo);
      if (med >= prev) {
        rep.noise_floor_index = lo;
        break;
      }
      prev = med;
    }
  }
  rep.V = std::move(svd.V);
  return rep;
}

/// |V^T x| for a single vector.
inline Vector svd_coefficients(const DenseMatrix& v, const Vector& x) {
  if (x.size() != v.rows)
    throw NumericalError("svd_coefficients: dimension mismatch");
  Vector out(v.cols, 0.0);
  for (std::size_t j = 0; j < v.cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.rows; ++i) s += v(i, j) * x[i];
    out[j] = std::abs(s);
  }
  return out;
}

/// |V^T x_k| for the requested iterations; throws if an iterate was thinned
/// out of the trace.
inline std::map<std::size_t, Vector> iterate_svd_coeffs(
    const DenseMatrix& v, const SolverTrace& trace,
    const std::vector<std::size_t>& ks) {
  std::map<std::size_t, Vector> out;
  for (std::size_t k : ks) out[k] = svd_coefficients(v, trace.iterate_at(k));
  return out;
}

// ---------------------------------------------------------------------------
// Eigenvalue spectrum of the iteration matrix B A.
// ---------------------------------------------------------------------------

struct SpectrumSummary {
  std::vector<std::complex<double>> eigenvalues;
  double min_real = 0.0;
  double max_modulus = 0.0;
  std::size_t n_negative_real = 0;
};

/// Dense B A (n x n) by sparse row combination; row-parallel.
inline DenseMatrix densify_product(const SparseMatrix& b,
                                   const SparseMatrix& a) {
  if (b.cols != a.rows) throw NumericalError("densify_product: shape mismatch");
  DenseMatrix ba(b.rows, a.cols);
  parallel_for(0, b.rows, [&](std::size_t i) {
    double* row = ba.a.data() + i * a.cols;
    for (std::size_t kb = b.row_offsets[i]; kb < b.row_offsets[i + 1]; ++kb) {
      const std::size_t k = b.col_indices[kb];
      const double bik = b.values[kb];
      for (std::size_t ka = a.row_offsets[k]; ka < a.row_offsets[k + 1]; ++ka)
        row[a.col_indices[ka]] += bik * a.values[ka];
    }
  });
  return ba;
}

/// All eigenvalues of B A at desk scale, with the summary used by the
/// convergence analysis of SIRT-type methods.
inline SpectrumSummary ba_spectrum(const ProjectorPair& pair,
                                   std::size_t dim_cap = kDefaultEigDimCap) {
  if (pair.B.rows > dim_cap)
    throw NumericalError("ba_spectrum: n = " + std::to_string(pair.B.rows) +
                         " exceeds the dense cap " + std::to_string(dim_cap));
  const DenseMatrix ba = densify_product(pair.B, pair.A);
  SpectrumSummary s;
  s.eigenvalues = dense_eig(ba, dim_cap);
  s.min_real = std::numeric_limits<double>::infinity();
  for (const auto& z : s.eigenvalues) {
    s.min_real = std::min(s.min_real, z.real());
    s.max_modulus = std::max(s.max_modulus, std::abs(z));
    if (z.real() < 0.0) ++s.n_negative_real;
  }
  if (s.eigenvalues.empty()) s.min_real = 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Subspace-angle bound for an unmatched pair.
// ---------------------------------------------------------------------------

struct SinThetaResult {
  double lhs;      // sqrt(||sin T(R(B), R(A^T))||^2 + ||sin T(R(B^T), R(A))||^2)
  double rhs;      // sqrt(2) ||B - A^T|| / max(sigma_r(A), sigma_r(B))
  double rhs_alt;  // sqrt(2) min(k2(A) ||B - A^T|| / ||A||, k2(B) ... / ||B||)
};

/// Checks the subspace-angle inequality for a pair (A, B) of equal rank.
/// All norms are spectral norms.
inline SinThetaResult sin_theta_check(const DenseMatrix& a,
                                      const DenseMatrix& b) {
  if (a.rows != b.cols || a.cols != b.rows)
    throw NumericalError("sin_theta_check: shapes do not conform");
  const SvdResult sa = dense_svd(a);
  const SvdResult sb = dense_svd(b);
  const std::size_t ra = detail::numeric_rank(sa.sigma);
  const std::size_t rb = detail::numeric_rank(sb.sigma);
  if (ra != rb)
    throw NumericalError("sin_theta_check: rank(A) = " + std::to_string(ra) +
                         " differs from rank(B) = " + std::to_string(rb));
  if (ra == 0) return {0.0, 0.0, 0.0};
  // R(B) vs R(A^T) in image space; R(B^T) vs R(A) in data space.
  const DenseMatrix qb = detail::leading_columns(sb.U, ra);
  const DenseMatrix qat = detail::leading_columns(sa.V, ra);
  const DenseMatrix qbt = detail::leading_columns(sb.V, ra);
  const DenseMatrix qa = detail::leading_columns(sa.U, ra);
  const double s1 = detail::max_principal_sine(qat, qb);
  const double s2 = detail::max_principal_sine(qa, qbt);

  DenseMatrix diff = transpose(a);  // B - A^T
  for (std::size_t i = 0; i < diff.rows; ++i)
    for (std::size_t j = 0; j < diff.cols; ++j)
      diff(i, j) = b(i, j) - diff(i, j);
  const double dnorm = detail::spectral_norm(diff);
  const double sra = sa.sigma[ra - 1];
  const double srb = sb.sigma[rb - 1];

  SinThetaResult out;
  out.lhs = std::sqrt(s1 * s1 + s2 * s2);
  out.rhs = std::sqrt(2.0) * dnorm / std::max(sra, srb);
  const double ka = sa.sigma[0] / sra;
  const double kb = sb.sigma[0] / srb;
  out.rhs_alt = std::sqrt(2.0) *
                std::min(ka * dnorm / sa.sigma[0], kb * dnorm / sb.sigma[0]);
  return out;
}

// ---------------------------------------------------------------------------
// First-order perturbation bound for the unmatched normal equations.
// ---------------------------------------------------------------------------

/// One perturbed problem: A_tilde = A + E1, B_tilde = A^T + E2^T,
/// b = b_exact + db. Perturbation norms scale linearly with epsilon.
struct PerturbationInstance {
  DenseMatrix A;
  DenseMatrix E1;
  DenseMatrix E2;  // n x m additive part of the back projector
  Vector b_exact;
  Vector db;
  double epsilon = 0.0;
};

struct PerturbationResult {
  double observed;  // ||dx_min|| / ||x_min||
  double bound;     // first-order bound
};

/// Seeded random acute instance (10 x 7, rank 5, condition number 5).
/// Perturbation norms are exactly epsilon in the spectral norm, so the whole
/// instance family scales linearly with epsilon. The corollary variant sets
/// E1 = 0 and keeps the data in the range of A; `e2_seed` re-randomizes the
/// direction of E2 at a fixed norm (0 derives it from `seed`).
inline PerturbationInstance make_perturbation_instance(
    std::uint64_t seed, double epsilon, bool corollary = false,
    std::uint64_t e2_seed = 0) {
  constexpr std::size_t m = 10, n = 7, r = 5;
  SplitMix64 rng(seed * 0x9E3779B9ULL + 1);
  auto gaussian_matrix = [](SplitMix64& g, std::size_t rows, std::size_t cols) {
    DenseMatrix out(rows, cols);
    for (double& v : out.a) v = g.next_gaussian();
    return out;
  };
  // Orthonormal factors from the SVD of seeded Gaussian blocks.
  const DenseMatrix qu =
      detail::leading_columns(dense_svd(gaussian_matrix(rng, m, r)).U, r);
  const DenseMatrix qv =
      detail::leading_columns(dense_svd(gaussian_matrix(rng, n, r)).U, r);
  PerturbationInstance inst;
  inst.epsilon = epsilon;
  inst.A = DenseMatrix(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < r; ++k) {
        const double sigma = std::pow(5.0, -static_cast<double>(k) / (r - 1));
        s += qu(i, k) * sigma * qv(j, k);
      }
      inst.A(i, j) = s;
    }

  Vector w(n);
  for (double& v : w) v = rng.next_gaussian();
  inst.b_exact = matvec(inst.A, w);
  if (!corollary) {
    // Out-of-range data component at 30% of the in-range part.
    Vector raw(m);
    for (double& v : raw) v = rng.next_gaussian();
    Vector perp = subtract(raw, detail::project_onto(qu, r, raw));
    const double pn = norm2(perp);
    if (pn > 0.0) {
      scale(0.3 * norm2(inst.b_exact) / pn, perp);
      for (std::size_t i = 0; i < m; ++i) inst.b_exact[i] += perp[i];
    }
  }

  DenseMatrix g1 = gaussian_matrix(rng, m, n);
  inst.E1 = DenseMatrix(m, n);
  if (!corollary) {
    const double g1n = detail::spectral_norm(g1);
    for (std::size_t i = 0; i < g1.a.size(); ++i)
      inst.E1.a[i] = epsilon * g1.a[i] / g1n;
  }
  SplitMix64 rng2(e2_seed == 0 ? seed * 0x9E3779B9ULL + 2 : e2_seed);
  DenseMatrix g2 = gaussian_matrix(rng2, n, m);
  const double g2n = detail::spectral_norm(g2);
  inst.E2 = DenseMatrix(n, m);
  for (std::size_t i = 0; i < g2.a.size(); ++i)
    inst.E2.a[i] = epsilon * g2.a[i] / g2n;

  inst.db.resize(m);
  for (double& v : inst.db) v = rng.next_gaussian();
  scale(epsilon * norm2(inst.b_exact) / norm2(inst.db), inst.db);
  return inst;
}

/// Evaluates the observed minimum-norm-solution error against the
/// first-order bound. Throws if the perturbations are not acute (any
/// projection-difference norm >= 1) or change the rank.
inline PerturbationResult perturbation_bound(const PerturbationInstance& inst) {
  const std::size_t m = inst.A.rows, n = inst.A.cols;
  if (inst.E1.rows != m || inst.E1.cols != n || inst.E2.rows != n ||
      inst.E2.cols != m || inst.b_exact.size() != m || inst.db.size() != m)
    throw NumericalError("perturbation_bound: instance shapes do not conform");

  DenseMatrix a_tilde = inst.A;
  for (std::size_t i = 0; i < a_tilde.a.size(); ++i)
    a_tilde.a[i] += inst.E1.a[i];
  DenseMatrix b_tilde = transpose(inst.A);  // A^T + E2 (E2 stored as n x m)
  for (std::size_t i = 0; i < b_tilde.a.size(); ++i)
    b_tilde.a[i] += inst.E2.a[i];

  const SvdResult sa = dense_svd(inst.A);
  const SvdResult sat = dense_svd(a_tilde);
  const SvdResult sbt = dense_svd(b_tilde);
  const std::size_t r = detail::numeric_rank(sa.sigma);
  if (detail::numeric_rank(sat.sigma) != r)
    throw NumericalError("perturbation_bound: rank of the perturbed A differs");
  if (detail::numeric_rank(sbt.sigma) != r)
    throw NumericalError("perturbation_bound: rank of the perturbed B differs");
  if (r == 0) throw NumericalError("perturbation_bound: A is zero");

  const DenseMatrix qa = detail::leading_columns(sa.U, r);       // R(A)
  const DenseMatrix qat = detail::leading_columns(sa.V, r);      // R(A^T)
  const struct {
    const char* name;
    double sine;
  } checks[] = {
      {"||P_R(A_tilde) - P_R(A)||",
       detail::max_principal_sine(qa, detail::leading_columns(sat.U, r))},
      {"||P_R(A_tilde^T) - P_R(A^T)||",
       detail::max_principal_sine(qat, detail::leading_columns(sat.V, r))},
      {"||P_R(B_tilde) - P_R(A^T)||",
       detail::max_principal_sine(qat, detail::leading_columns(sbt.U, r))},
      {"||P_R(B_tilde^T) - P_R(A)||",
       detail::max_principal_sine(qa, detail::leading_columns(sbt.V, r))},
  };
  for (const auto& c : checks)
    if (!(c.sine < 1.0))
      throw NumericalError(std::string("perturbation_bound: acuteness violated: ") +
                           c.name + " >= 1");

  // Observed error of the minimum-norm solutions.
  const Vector x_min = detail::pinv_apply(sa, inst.b_exact);
  Vector b_noisy = inst.b_exact;
  for (std::size_t i = 0; i < m; ++i) b_noisy[i] += inst.db[i];
  const DenseMatrix ba = matmul(b_tilde, a_tilde);
  const Vector bb = matvec(b_tilde, b_noisy);
  const Vector x_pert = detail::pinv_apply(dense_svd(ba), bb);
  const double xnorm = norm2(x_min);
  if (xnorm == 0.0)
    throw NumericalError("perturbation_bound: x_min is zero");
  const double observed = norm2(subtract(x_pert, x_min)) / xnorm;

  // First-order bound.
  const double sigma_r = sa.sigma[r - 1];
  const double kappa = sa.sigma[0] / sigma_r;
  const double bnorm = norm2(inst.b_exact);
  const Vector b_par = detail::project_onto(qa, r, inst.b_exact);
  const Vector b_perp = subtract(inst.b_exact, b_par);
  const Vector db_par = detail::project_onto(qa, r, inst.db);
  const double e1n = detail::spectral_norm(inst.E1);
  const double e2n = detail::spectral_norm(inst.E2);
  const double bound =
      kappa * ((2.0 * e1n * norm2(b_par) / bnorm + e2n * norm2(b_perp) / bnorm) /
                   sigma_r +
               norm2(db_par) / bnorm);
  return {observed, bound};
}

// ---------------------------------------------------------------------------
// Error histories.
// ---------------------------------------------------------------------------

struct ErrorHistory {
  Vector errnorms;     // aligned with the trace's retained iterates
  std::vector<std::size_t> ks;
  std::size_t k_min = 0;  // iteration index of the minimum (1-based)
  double err_min = 0.0;
};

/// Relative reconstruction error of every retained iterate and its argmin
/// (ties resolved toward the smallest k).
inline ErrorHistory error_history(const SolverTrace& trace,
                                  const Vector& xbar) {
  if (trace.iterates.empty())
    throw NumericalError("error_history: trace has no retained iterates");
  const double xnorm = norm2(xbar);
  if (xnorm == 0.0) throw NumericalError("error_history: zero ground truth");
  ErrorHistory h;
  h.ks = trace.iterate_ks;
  h.errnorms.reserve(trace.iterates.size());
  for (const Vector& x : trace.iterates)
    h.errnorms.push_back(norm2(subtract(xbar, x)) / xnorm);
  std::size_t best = 0;
  for (std::size_t i = 1; i < h.errnorms.size(); ++i)
    if (h.errnorms[i] < h.errnorms[best]) best = i;
  h.k_min = h.ks[best];
  h.err_min = h.errnorms[best];
  return h;
}

}  // namespace ctkrylov
