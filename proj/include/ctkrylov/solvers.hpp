#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctkrylov/errors.hpp"
#include "ctkrylov/rng.hpp"
#include "ctkrylov/sparse.hpp"
#include "ctkrylov/stopping.hpp"

namespace ctkrylov {

struct SolverOptions {
  std::size_t max_iter = 100;
  bool reorthogonalize = false;  // optional second Gram-Schmidt pass
  StoppingConfig stopping;
  bool halt_on_stop = true;      // break when the active rule fires
  std::size_t keep_stride = 1;   // store x_k when (k-1) % stride == 0; 0 keeps none
  const Vector* xbar = nullptr;  // ground truth, enables error norms
  double divergence_scale = 1.0;     // flag when ||x_k|| > 1e6 * scale
  double breakdown_tol = 1e-14;      // lucky breakdown vs ||H_k||_F
  bool capture_arnoldi = false;      // keep the basis and Hessenberg columns
};

/// Arnoldi factorization data captured for verification: basis W with
/// orthonormal columns and the unrotated Hessenberg columns, satisfying
/// op(W_k) = W_{k+1} H_k.
struct ArnoldiState {
  std::vector<Vector> basis;        // w_1 .. w_{k+1} (or w_k on breakdown)
  std::vector<Vector> hessenberg;   // column j holds h_{1..j+2, j+1}
  double beta = 0.0;                // ||r_0||
};

/// Per-iteration record of a solver run. Residual norms are indexed by
/// iteration k = 1..iterations(); inner norms are the solver's own objective
/// (recurrence) values, true norms are recomputed as ||b - A x_k||.
struct SolverTrace {
  std::string method;
  std::size_t basis_len = 0;  // length of one stored basis vector
  std::vector<Vector> iterates;
  std::vector<std::size_t> iterate_ks;  // 1-based
  Vector true_resnorms;
  Vector inner_resnorms;
  Vector errnorms;
  Vector dp_lhs, dp_rhs;    // filled when a noise norm is available
  Vector ncp_distances;     // filled when a sinogram layout is available
  std::optional<std::size_t> stop_index;
  std::string stop_reason;
  bool diverged = false;
  std::optional<ArnoldiState> arnoldi;  // present when capture_arnoldi is set

  std::size_t iterations() const { return true_resnorms.size(); }

  /// Basis-vector storage after k iterations (k vectors of basis_len).
  std::size_t storage_for(std::size_t k) const { return k * basis_len; }

  const Vector& iterate_at(std::size_t k) const {
    for (std::size_t i = 0; i < iterate_ks.size(); ++i)
      if (iterate_ks[i] == k) return iterates[i];
    throw NumericalError("trace: iterate " + std::to_string(k) +
                         " was not retained");
  }
};

namespace detail {

enum class StepOutcome { Continue, Halt };

/// Shared per-iteration bookkeeping: trace columns, stopping diagnostics,
/// and the halting decision.
inline StepOutcome record_iteration(SolverTrace& trace,
                                    const SolverOptions& opts, std::size_t k,
                                    const Vector& x, const Vector& r,
                                    double inner_resnorm) {
  if (!all_finite(x))
    throw NumericalError(trace.method + ": non-finite iterate at iteration " +
                         std::to_string(k));
  const double resnorm = norm2(r);
  if (!std::isfinite(resnorm))
    throw NumericalError(trace.method + ": non-finite residual at iteration " +
                         std::to_string(k));
  trace.true_resnorms.push_back(resnorm);
  trace.inner_resnorms.push_back(inner_resnorm);
  if (opts.xbar) {
    const double xnorm = norm2(*opts.xbar);
    trace.errnorms.push_back(norm2(subtract(*opts.xbar, x)) / xnorm);
  }
  if (opts.keep_stride > 0 && (k - 1) % opts.keep_stride == 0) {
    trace.iterates.push_back(x);
    trace.iterate_ks.push_back(k);
  }
  const StoppingConfig& sc = opts.stopping;
  if (sc.has_noise_norm()) {
    trace.dp_lhs.push_back(resnorm);
    trace.dp_rhs.push_back(sc.dp_tau * sc.noise_norm);
  }
  if (sc.has_layout())
    trace.ncp_distances.push_back(ncp_distance(r, sc.n_det, sc.n_ang));

  if (!trace.stop_index) {
    if (sc.rule == StopRule::DP && dp_check(resnorm, sc)) {
      trace.stop_index = k;
      trace.stop_reason = "dp";
    } else if (sc.rule == StopRule::NCP) {
      if (auto idx = ncp_stop(trace.ncp_distances, sc.ncp_patience)) {
        trace.stop_index = *idx;
        trace.stop_reason = "ncp";
      }
    }
  }
  return (trace.stop_index && opts.halt_on_stop) ? StepOutcome::Halt
                                                 : StepOutcome::Continue;
}

/// GMRES with modified Gram-Schmidt Arnoldi and incrementally updated
/// Givens QR of the Hessenberg matrix. `apply_op` is the Krylov operator
/// (AB or BA), `x_from_basis` maps the basis combination back to image
/// space, and `residual` recomputes b - A x explicitly.
inline SolverTrace run_gmres(
    const Vector& r0, const SolverOptions& opts, SolverTrace trace,
    const std::function<Vector(const Vector&)>& apply_op,
    const std::function<Vector(const std::vector<Vector>&, const Vector&)>&
        x_from_basis,
    const std::function<Vector(const Vector&)>& residual) {
  const double beta = norm2(r0);
  if (beta == 0.0) {
    trace.stop_reason = "zero initial residual";
    return trace;
  }
  std::vector<Vector> basis;  // w_1 .. w_{k+1}
  basis.push_back(r0);
  scale(1.0 / beta, basis[0]);
  if (opts.capture_arnoldi) {
    trace.arnoldi.emplace();
    trace.arnoldi->beta = beta;
  }

  std::vector<Vector> r_cols;   // upper-triangular factor, one column per k
  Vector cs, sn;                // stored Givens rotations
  Vector g(1, beta);            // rotated beta * e1
  double h_fro2 = 0.0;          // running ||H_k||_F^2
  bool breakdown = false;

  for (std::size_t k = 1; k <= opts.max_iter; ++k) {
    Vector q = apply_op(basis[k - 1]);
    Vector hcol(k + 1, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      const double hik = dot(q, basis[i]);
      hcol[i] = hik;
      axpy(-hik, basis[i], q);
    }
    if (opts.reorthogonalize) {
      for (std::size_t i = 0; i < k; ++i) {
        const double c = dot(q, basis[i]);
        axpy(-c, basis[i], q);
        hcol[i] += c;
      }
    }
    const double hk1 = norm2(q);
    hcol[k] = hk1;
    for (double v : hcol) h_fro2 += v * v;
    if (trace.arnoldi) trace.arnoldi->hessenberg.push_back(hcol);
    if (hk1 <= opts.breakdown_tol * std::sqrt(h_fro2)) {
      breakdown = true;  // lucky breakdown: exact solution in this subspace
    } else {
      scale(1.0 / hk1, q);
      basis.push_back(std::move(q));
    }

    // Apply stored rotations to the new column, then zero its subdiagonal.
    for (std::size_t i = 0; i + 1 < k; ++i) {
      const double t = cs[i] * hcol[i] + sn[i] * hcol[i + 1];
      hcol[i + 1] = -sn[i] * hcol[i] + cs[i] * hcol[i + 1];
      hcol[i] = t;
    }
    const double denom = std::hypot(hcol[k - 1], hcol[k]);
    const double c = denom == 0.0 ? 1.0 : hcol[k - 1] / denom;
    const double s = denom == 0.0 ? 0.0 : hcol[k] / denom;
    cs.push_back(c);
    sn.push_back(s);
    hcol[k - 1] = denom;
    hcol[k] = 0.0;
    g.push_back(-s * g[k - 1]);
    g[k - 1] = c * g[k - 1];
    hcol.pop_back();
    r_cols.push_back(std::move(hcol));

    // y_k from back substitution on the rotated system.
    Vector y(k, 0.0);
    for (std::size_t i = k; i-- > 0;) {
      double sum = g[i];
      for (std::size_t j = i + 1; j < k; ++j) sum -= r_cols[j][i] * y[j];
      if (r_cols[i][i] == 0.0)
        throw NumericalError(trace.method + ": singular Hessenberg system at iteration " +
                             std::to_string(k));
      y[i] = sum / r_cols[i][i];
    }
    const Vector x = x_from_basis(basis, y);
    const Vector r = residual(x);
    const double inner = std::abs(g[k]);
    const StepOutcome outcome = record_iteration(trace, opts, k, x, r, inner);
    if (breakdown) {
      trace.stop_index = trace.stop_index.value_or(k);
      trace.stop_reason = trace.stop_reason.empty() ? "breakdown" : trace.stop_reason;
      break;
    }
    if (outcome == StepOutcome::Halt) break;
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "max_iter";
  if (trace.arnoldi) trace.arnoldi->basis = basis;
  return trace;
}

}  // namespace detail

/// GMRES on min || b - A B u ||_2 with x = B u (B as right preconditioner).
/// The Krylov basis lives in data space (length m).
inline SolverTrace ab_gmres(const SparseMatrix& A, const SparseMatrix& B,
                            const Vector& b, const Vector& x0,
                            const SolverOptions& opts) {
  if (A.rows != B.cols || A.cols != B.rows)
    throw NumericalError("ab_gmres: A and B shapes do not conform");
  if (b.size() != A.rows) throw NumericalError("ab_gmres: b length mismatch");
  if (x0.size() != A.cols) throw NumericalError("ab_gmres: x0 length mismatch");
  if (opts.max_iter < 1) throw ConfigError("ab_gmres: max_iter must be >= 1");
  SolverTrace trace;
  trace.method = "ab-gmres";
  trace.basis_len = A.rows;
  const Vector r0 = subtract(b, matvec(A, x0));
  return detail::run_gmres(
      r0, opts, std::move(trace),
      [&](const Vector& w) { return matvec(A, matvec(B, w)); },
      [&](const std::vector<Vector>& basis, const Vector& y) {
        Vector z(A.rows, 0.0);
        for (std::size_t j = 0; j < y.size(); ++j) axpy(y[j], basis[j], z);
        Vector x = matvec(B, z);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += x0[i];
        return x;
      },
      [&](const Vector& x) { return subtract(b, matvec(A, x)); });
}

/// GMRES on min || B b - B A x ||_2 (B as left preconditioner). The Krylov
/// basis lives in image space (length n).
inline SolverTrace ba_gmres(const SparseMatrix& A, const SparseMatrix& B,
                            const Vector& b, const Vector& x0,
                            const SolverOptions& opts) {
  if (A.rows != B.cols || A.cols != B.rows)
    throw NumericalError("ba_gmres: A and B shapes do not conform");
  if (b.size() != A.rows) throw NumericalError("ba_gmres: b length mismatch");
  if (x0.size() != A.cols) throw NumericalError("ba_gmres: x0 length mismatch");
  if (opts.max_iter < 1) throw ConfigError("ba_gmres: max_iter must be >= 1");
  SolverTrace trace;
  trace.method = "ba-gmres";
  trace.basis_len = A.cols;
  const Vector r0 = matvec(B, subtract(b, matvec(A, x0)));
  return detail::run_gmres(
      r0, opts, std::move(trace),
      [&](const Vector& w) { return matvec(B, matvec(A, w)); },
      [&](const std::vector<Vector>& basis, const Vector& y) {
        Vector x = x0;
        for (std::size_t j = 0; j < y.size(); ++j) axpy(y[j], basis[j], x);
        return x;
      },
      [&](const Vector& x) { return subtract(b, matvec(A, x)); });
}

namespace detail {

/// Stores the Golub-Kahan vectors and projects new ones against the whole
/// history; used by the equivalence experiments, off by default.
struct LanczosReorth {
  bool active = false;
  std::vector<Vector> us, vs;

  void note_started(const Vector& u, const Vector& v) {
    if (!active) return;
    us.push_back(u);
    vs.push_back(v);
  }
  void left(Vector& u) {
    if (!active) return;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& p : us) axpy(-dot(u, p), p, u);
  }
  void right(Vector& v) {
    if (!active) return;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& p : vs) axpy(-dot(v, p), p, v);
  }
  void note_normalized(const Vector& u, const Vector& v) {
    if (!active) return;
    us.push_back(u);
    vs.push_back(v);
  }
};

}  // namespace detail

/// LSQR (Golub-Kahan bidiagonalization with Givens updates; plain short
/// recurrences by default). Inner norms are the recurrence residual
/// estimates; true norms are recomputed explicitly.
inline SolverTrace lsqr(const SparseMatrix& A, const Vector& b,
                        const SolverOptions& opts) {
  if (b.size() != A.rows) throw NumericalError("lsqr: b length mismatch");
  if (opts.max_iter < 1) throw ConfigError("lsqr: max_iter must be >= 1");
  SolverTrace trace;
  trace.method = "lsqr";
  trace.basis_len = 0;  // short recurrences, no stored basis
  const SparseMatrix At = transpose(A);
  detail::LanczosReorth reorth;
  reorth.active = opts.reorthogonalize;

  Vector u = b;
  double beta = norm2(u);
  if (beta == 0.0) {
    trace.stop_reason = "zero right-hand side";
    return trace;
  }
  scale(1.0 / beta, u);
  Vector v = matvec(At, u);
  double alpha = norm2(v);
  if (alpha == 0.0) {
    trace.stop_reason = "b orthogonal to range(A)";
    return trace;
  }
  scale(1.0 / alpha, v);
  reorth.note_started(u, v);
  Vector w = v;
  Vector x(A.cols, 0.0);
  double phibar = beta, rhobar = alpha;

  for (std::size_t k = 1; k <= opts.max_iter; ++k) {
    Vector av = matvec(A, v);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = av[i] - alpha * u[i];
    reorth.left(u);
    beta = norm2(u);
    if (beta > 0.0) scale(1.0 / beta, u);
    Vector atu = matvec(At, u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = atu[i] - beta * v[i];
    reorth.right(v);
    alpha = norm2(v);
    if (alpha > 0.0) scale(1.0 / alpha, v);
    reorth.note_normalized(u, v);

    const double rho = std::hypot(rhobar, beta);
    const double c = rhobar / rho;
    const double s = beta / rho;
    const double theta = s * alpha;
    rhobar = -c * alpha;
    const double phi = c * phibar;
    phibar = s * phibar;

    axpy(phi / rho, w, x);
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = v[i] - (theta / rho) * w[i];

    const Vector r = subtract(b, matvec(A, x));
    const auto outcome =
        detail::record_iteration(trace, opts, k, x, r, std::abs(phibar));
    if (outcome == detail::StepOutcome::Halt) break;
    if (beta == 0.0 || alpha == 0.0) {
      trace.stop_reason = "breakdown";
      break;
    }
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "max_iter";
  return trace;
}

/// LSMR (equivalent to MINRES on the normal equations). Inner norms are the
/// recurrence estimates of ||A^T r_k||.
inline SolverTrace lsmr(const SparseMatrix& A, const Vector& b,
                        const SolverOptions& opts) {
  if (b.size() != A.rows) throw NumericalError("lsmr: b length mismatch");
  if (opts.max_iter < 1) throw ConfigError("lsmr: max_iter must be >= 1");
  SolverTrace trace;
  trace.method = "lsmr";
  trace.basis_len = 0;
  const SparseMatrix At = transpose(A);
  detail::LanczosReorth reorth;
  reorth.active = opts.reorthogonalize;

  Vector u = b;
  double beta = norm2(u);
  if (beta == 0.0) {
    trace.stop_reason = "zero right-hand side";
    return trace;
  }
  scale(1.0 / beta, u);
  Vector v = matvec(At, u);
  double alpha = norm2(v);
  if (alpha == 0.0) {
    trace.stop_reason = "b orthogonal to range(A)";
    return trace;
  }
  scale(1.0 / alpha, v);
  reorth.note_started(u, v);

  double alphabar = alpha, zetabar = alpha * beta;
  double rho = 1.0, rhobar = 1.0, cbar = 1.0, sbar = 0.0;
  Vector h = v;
  Vector hbar(A.cols, 0.0);
  Vector x(A.cols, 0.0);

  for (std::size_t k = 1; k <= opts.max_iter; ++k) {
    Vector av = matvec(A, v);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = av[i] - alpha * u[i];
    reorth.left(u);
    beta = norm2(u);
    if (beta > 0.0) scale(1.0 / beta, u);
    Vector atu = matvec(At, u);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = atu[i] - beta * v[i];
    reorth.right(v);
    alpha = norm2(v);
    if (alpha > 0.0) scale(1.0 / alpha, v);
    reorth.note_normalized(u, v);

    const double rhoold = rho;
    rho = std::hypot(alphabar, beta);
    const double c = alphabar / rho;
    const double s = beta / rho;
    const double thetanew = s * alpha;
    alphabar = c * alpha;

    const double rhobarold = rhobar;
    const double thetabar = sbar * rho;
    const double rhotemp = cbar * rho;
    rhobar = std::hypot(rhotemp, thetanew);
    cbar = rhotemp / rhobar;
    sbar = thetanew / rhobar;
    const double zeta = cbar * zetabar;
    zetabar = -sbar * zetabar;

    for (std::size_t i = 0; i < hbar.size(); ++i)
      hbar[i] = h[i] - (thetabar * rho / (rhoold * rhobarold)) * hbar[i];
    axpy(zeta / (rho * rhobar), hbar, x);
    for (std::size_t i = 0; i < h.size(); ++i)
      h[i] = v[i] - (thetanew / rho) * h[i];

    const Vector r = subtract(b, matvec(A, x));
    const auto outcome =
        detail::record_iteration(trace, opts, k, x, r, std::abs(zetabar));
    if (outcome == detail::StepOutcome::Halt) break;
    if (beta == 0.0 || alpha == 0.0) {
      trace.stop_reason = "breakdown";
      break;
    }
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "max_iter";
  return trace;
}

/// Landweber-SIRT with an arbitrary back projector:
/// x_k = x_{k-1} + omega * B (b - A x_{k-1}). Divergence is a reported
/// outcome (flag in the trace), not an error.
inline SolverTrace landweber(const SparseMatrix& A, const SparseMatrix& B,
                             const Vector& b, double omega, std::size_t iters,
                             const SolverOptions& opts = {}) {
  if (A.rows != B.cols || A.cols != B.rows)
    throw NumericalError("landweber: A and B shapes do not conform");
  if (b.size() != A.rows) throw NumericalError("landweber: b length mismatch");
  if (!(omega > 0.0)) throw ConfigError("landweber: omega must be > 0");
  SolverTrace trace;
  trace.method = "landweber";
  trace.basis_len = 0;
  Vector x(A.cols, 0.0);
  const double limit = 1e6 * opts.divergence_scale;
  for (std::size_t k = 1; k <= iters; ++k) {
    Vector r = subtract(b, matvec(A, x));
    axpy(omega, matvec(B, r), x);
    const Vector rk = subtract(b, matvec(A, x));
    const double resnorm = norm2(rk);
    trace.true_resnorms.push_back(resnorm);
    trace.inner_resnorms.push_back(resnorm);
    if (opts.xbar)
      trace.errnorms.push_back(norm2(subtract(*opts.xbar, x)) /
                               norm2(*opts.xbar));
    if (opts.keep_stride > 0 && (k - 1) % opts.keep_stride == 0) {
      trace.iterates.push_back(x);
      trace.iterate_ks.push_back(k);
    }
    if (!all_finite(x) || norm2(x) > limit) {
      trace.diverged = true;
      trace.stop_index = k;
      trace.stop_reason = "diverged";
      break;
    }
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "max_iter";
  return trace;
}

/// Largest singular value via power iteration on A^T A; used to pick the
/// Landweber relaxation parameter.
inline double sigma_max_estimate(const SparseMatrix& A,
                                 std::size_t iters = 100,
                                 std::uint64_t seed = 0x5eed) {
  const SparseMatrix At = transpose(A);
  SplitMix64 rng(seed);
  Vector v(A.cols);
  for (double& val : v) val = rng.next_gaussian();
  double lambda = 0.0;
  scale(1.0 / norm2(v), v);
  for (std::size_t i = 0; i < iters; ++i) {
    Vector w = matvec(At, matvec(A, v));
    lambda = norm2(w);
    if (lambda == 0.0) return 0.0;
    scale(1.0 / lambda, w);
    v = std::move(w);
  }
  return std::sqrt(lambda);
}

}  // namespace ctkrylov
