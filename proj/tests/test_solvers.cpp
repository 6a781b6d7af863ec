#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ctkrylov/dense.hpp"
#include "ctkrylov/phantom.hpp"
#include "ctkrylov/projector.hpp"
#include "ctkrylov/solvers.hpp"
#include "oracles.hpp"

using namespace ctkrylov;

namespace {

// 2 * (signed permutation): exactly orthogonal columns scaled by 2, so both
// iteration matrices AB and BA equal 4I.
SparseMatrix scaled_signed_permutation(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i-- > 1;)
    std::swap(perm[i], perm[rng.next_u64() % (i + 1)]);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i)
    t.push_back({i, perm[i], rng.next_unit() < 0.5 ? 2.0 : -2.0});
  return csr_from_triplets(n, n, std::move(t));
}

Vector atr_norm_history(const SparseMatrix& a, const Vector& b,
                        const SolverTrace& trace) {
  // || A^T (b - A x_k) || recomputed through the dense oracle path.
  const auto ad = oracles::dense_from_csr(a);
  Vector out;
  for (const Vector& x : trace.iterates) {
    const auto ax = oracles::dense_mv(ad, x);
    Vector r(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) r[i] = b[i] - ax[i];
    Vector atr(a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = 0; j < a.cols; ++j) atr[j] += ad[i][j] * r[i];
    out.push_back(norm2(atr));
  }
  return out;
}

}  // namespace

TEST_CASE("gmres variants converge in one iteration on a scaled orthogonal matrix") {
  const SparseMatrix a = scaled_signed_permutation(12, 3);
  const SparseMatrix b_mat = transpose(a);
  const Vector rhs = oracles::random_vector(12, 4);
  const Vector x0(12, 0.0);
  SolverOptions opts;
  opts.max_iter = 5;
  for (auto* run : {&ab_gmres, &ba_gmres}) {
    const SolverTrace t = (*run)(a, b_mat, rhs, x0, opts);
    REQUIRE(t.iterations() == 1);
    CHECK(t.true_resnorms[0] <= 1e-10 * norm2(rhs));
    CHECK(t.stop_reason == "breakdown");
    CHECK(t.stop_index.value() == 1);
  }
}

TEST_CASE("matched-transpose equivalences on small instances") {
  const SparseMatrix a = oracles::random_csr(40, 25, 0.5, 11);
  const SparseMatrix b_mat = transpose(a);
  const Vector rhs = oracles::random_vector(40, 12);
  const Vector x0(25, 0.0);
  SolverOptions opts;
  opts.max_iter = 12;
  opts.keep_stride = 0;
  const SolverTrace tab = ab_gmres(a, b_mat, rhs, x0, opts);
  const SolverTrace tba = ba_gmres(a, b_mat, rhs, x0, opts);
  const SolverTrace tq = lsqr(a, rhs, opts);
  const SolverTrace tm = lsmr(a, rhs, opts);
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(std::abs(tab.true_resnorms[k] - tq.true_resnorms[k]) <=
          1e-8 * tq.true_resnorms[k]);
    CHECK(std::abs(tba.true_resnorms[k] - tm.true_resnorms[k]) <=
          1e-8 * tm.true_resnorms[k]);
  }
}

TEST_CASE("gmres trace invariants") {
  const ScanGeometry g = standard_geometry(SizeClass::Desk);
  const SparseMatrix a = build_matrix(g, ProjModel::Strip);
  const SparseMatrix b_mat = transpose(build_matrix(g, ProjModel::Line));
  const Phantom ph = make_phantom(PhantomKind::ThreePhases, 64, 42);
  const auto [rhs, en] = add_noise(synth_sinogram(a, ph), {0.003, 7});
  const Vector x0(a.cols, 0.0);
  SolverOptions opts;
  opts.max_iter = 25;
  opts.keep_stride = 0;
  opts.capture_arnoldi = true;

  const SolverTrace tab = ab_gmres(a, b_mat, rhs, x0, opts);
  const SolverTrace tba = ba_gmres(a, b_mat, rhs, x0, opts);

  SECTION("inner residual norms never increase") {
    for (const SolverTrace* t : {&tab, &tba})
      for (std::size_t k = 1; k < t->iterations(); ++k)
        CHECK(t->inner_resnorms[k] <=
              t->inner_resnorms[k - 1] * (1.0 + 1e-10));
  }
  SECTION("ab-gmres inner norms equal the true residual norms") {
    for (std::size_t k = 0; k < tab.iterations(); ++k)
      CHECK(std::abs(tab.inner_resnorms[k] - tab.true_resnorms[k]) <=
            1e-10 * tab.true_resnorms[k]);
  }
  SECTION("basis is orthonormal") {
    for (const SolverTrace* t : {&tab, &tba}) {
      const auto& basis = t->arnoldi->basis;
      for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = i; j < basis.size(); ++j) {
          const double expected = i == j ? 1.0 : 0.0;
          CHECK(std::abs(dot(basis[i], basis[j]) - expected) <= 1e-10);
        }
    }
  }
  SECTION("arnoldi relation holds columnwise") {
    struct Case {
      const SolverTrace* t;
      bool ab;
    } cases[] = {{&tab, true}, {&tba, false}};
    for (const auto& c : cases) {
      const auto& st = *c.t->arnoldi;
      double h_fro = 0.0;
      for (const Vector& col : st.hessenberg)
        for (double v : col) h_fro += v * v;
      h_fro = std::sqrt(h_fro);
      for (std::size_t j = 0; j < st.hessenberg.size(); ++j) {
        const Vector& w = st.basis[j];
        Vector lhs = c.ab ? matvec(a, matvec(b_mat, w))
                          : matvec(b_mat, matvec(a, w));
        for (std::size_t i = 0; i < st.hessenberg[j].size() && i < st.basis.size(); ++i)
          axpy(-st.hessenberg[j][i], st.basis[i], lhs);
        CHECK(norm2(lhs) <= 1e-8 * h_fro);
      }
    }
  }
  SECTION("storage accounting") {
    CHECK(tab.basis_len == a.rows);
    CHECK(tba.basis_len == a.cols);
    CHECK(tab.storage_for(10) == 10 * 5760);
    CHECK(tba.storage_for(10) == 10 * 4096);
    // Published bookkeeping: 34 long vectors of length 252000 and 38 of
    // length 176400.
    SolverTrace large_ab;
    large_ab.basis_len = 252000;
    CHECK(large_ab.storage_for(34) == 8568000);
    SolverTrace large_ba;
    large_ba.basis_len = 176400;
    CHECK(large_ba.storage_for(38) == 6703200);
  }
}

TEST_CASE("lsqr") {
  SECTION("consistent well-conditioned system converges in rank steps") {
    SplitMix64 rng(21);
    std::vector<Triplet> tr;
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 10; ++j)
        tr.push_back({i, j, rng.next_gaussian() + (i == j ? 4.0 : 0.0)});
    const SparseMatrix a = csr_from_triplets(20, 10, tr);
    Vector xs = oracles::random_vector(10, 22);
    const Vector rhs = matvec(a, xs);  // b in range(A)
    SolverOptions opts;
    opts.max_iter = 10;
    const SolverTrace t = lsqr(a, rhs, opts);
    CHECK(t.true_resnorms.back() <= 1e-10 * norm2(rhs));
  }
  SECTION("normal-equations residual vanishes at convergence") {
    const SparseMatrix a = oracles::random_csr(50, 30, 0.4, 31);
    const Vector rhs = oracles::random_vector(50, 32);
    SolverOptions opts;
    opts.max_iter = 60;
    const SolverTrace t = lsqr(a, rhs, opts);
    const Vector hist = atr_norm_history(a, rhs, t);
    CHECK(hist.back() <= 1e-8);
  }
  SECTION("rejects bad arguments") {
    const SparseMatrix a = oracles::random_csr(10, 5, 0.5, 1);
    CHECK_THROWS_AS(lsqr(a, Vector(4, 1.0), SolverOptions{}), NumericalError);
    SolverOptions opts;
    opts.max_iter = 0;
    CHECK_THROWS_AS(lsqr(a, Vector(10, 1.0), opts), ConfigError);
  }
}

TEST_CASE("lsmr") {
  SECTION("consistent square system agrees with lsqr") {
    SplitMix64 rng(41);
    std::vector<Triplet> tr;
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t j = 0; j < 15; ++j)
        tr.push_back({i, j, rng.next_gaussian() + (i == j ? 5.0 : 0.0)});
    const SparseMatrix a = csr_from_triplets(15, 15, tr);
    const Vector rhs = oracles::random_vector(15, 42);
    SolverOptions opts;
    opts.max_iter = 40;
    opts.keep_stride = 1;
    const SolverTrace tq = lsqr(a, rhs, opts);
    const SolverTrace tm = lsmr(a, rhs, opts);
    const Vector diff = subtract(tq.iterates.back(), tm.iterates.back());
    CHECK(norm2(diff) <= 1e-8 * norm2(tq.iterates.back()));
  }
  SECTION("normal-equations residual norm is nonincreasing") {
    for (std::uint64_t seed : {51, 52, 53}) {
      const SparseMatrix a = oracles::random_csr(30, 18, 0.5, seed);
      const Vector rhs = oracles::random_vector(30, seed + 100);
      SolverOptions opts;
      opts.max_iter = 18;
      const SolverTrace t = lsmr(a, rhs, opts);
      const Vector hist = atr_norm_history(a, rhs, t);
      for (std::size_t k = 1; k < hist.size(); ++k)
        CHECK(hist[k] <= hist[k - 1] * (1.0 + 1e-10) + 1e-12);
    }
  }
}

TEST_CASE("landweber") {
  SECTION("matched iterates follow the spectral filter factors") {
    const SparseMatrix a = oracles::random_csr(30, 20, 0.9, 61);
    const SparseMatrix b_mat = transpose(a);
    const Vector rhs = oracles::random_vector(30, 62);
    const SvdResult svd = dense_svd(densify(a));
    const double omega = 1.0 / (svd.sigma[0] * svd.sigma[0]);
    SolverOptions opts;
    opts.keep_stride = 1;
    const SolverTrace t = landweber(a, b_mat, rhs, omega, 20, opts);
    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{20}}) {
      const Vector& x = t.iterate_at(k);
      for (std::size_t i = 0; i < svd.sigma.size(); ++i) {
        double vx = 0.0, ub = 0.0;
        for (std::size_t r = 0; r < a.cols; ++r) vx += svd.V(r, i) * x[r];
        for (std::size_t r = 0; r < a.rows; ++r) ub += svd.U(r, i) * rhs[r];
        const double s = svd.sigma[i];
        const double phi =
            1.0 - std::pow(1.0 - omega * s * s, static_cast<double>(k));
        CHECK(std::abs(vx - phi * ub / s) <= 1e-8);
      }
    }
  }
  SECTION("negative-real eigenvalue of BA triggers the divergence flag") {
    const SparseMatrix a = csr_from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 1.0}});
    const SparseMatrix b_mat =
        csr_from_triplets(2, 2, {{0, 0, 0.5}, {1, 1, -1.0}});
    // BA = diag(1, -1): the second Landweber factor is 1 + omega > 1.
    const SolverTrace t = landweber(a, b_mat, {1.0, 1.0}, 0.5, 200);
    CHECK(t.diverged);
    CHECK(t.stop_reason == "diverged");
  }
  SECTION("matched pair with omega below the stability limit stays bounded") {
    const SparseMatrix a = oracles::random_csr(25, 16, 0.5, 71);
    const SparseMatrix b_mat = transpose(a);
    const Vector rhs = oracles::random_vector(25, 72);
    const double s1 = sigma_max_estimate(a);
    const SolverTrace t = landweber(a, b_mat, rhs, 1.9 / (s1 * s1), 500);
    CHECK_FALSE(t.diverged);
  }
  SECTION("omega must be positive") {
    const SparseMatrix a = oracles::random_csr(4, 4, 0.9, 81);
    CHECK_THROWS_AS(landweber(a, transpose(a), Vector(4, 1.0), 0.0, 5),
                    ConfigError);
  }
}

TEST_CASE("stopping rules drive solver termination") {
  const ScanGeometry g = standard_geometry(SizeClass::Desk);
  const SparseMatrix a = build_matrix(g, ProjModel::Strip);
  const SparseMatrix b_mat = transpose(a);
  const Phantom ph = make_phantom(PhantomKind::ThreePhases, 64, 42);
  const auto [rhs, en] = add_noise(synth_sinogram(a, ph), {0.03, 7});
  const Vector x0(a.cols, 0.0);

  SECTION("discrepancy principle halts at the first crossing") {
    SolverOptions opts;
    opts.max_iter = 60;
    opts.stopping.rule = StopRule::DP;
    opts.stopping.noise_norm = en;
    const SolverTrace t = ab_gmres(a, b_mat, rhs, x0, opts);
    REQUIRE(t.stop_index.has_value());
    CHECK(t.stop_reason == "dp");
    CHECK(t.iterations() == *t.stop_index);
    CHECK(t.true_resnorms.back() <= en);
    // All earlier residuals sit above the threshold.
    for (std::size_t k = 0; k + 1 < t.iterations(); ++k)
      CHECK(t.true_resnorms[k] > en);
  }
  SECTION("ncp rule halts after its patience runs out") {
    SolverOptions opts;
    opts.max_iter = 60;
    opts.stopping.rule = StopRule::NCP;
    opts.stopping.n_det = g.n_det;
    opts.stopping.n_ang = g.angles_deg.size();
    opts.stopping.ncp_patience = 3;
    const SolverTrace t = ab_gmres(a, b_mat, rhs, x0, opts);
    REQUIRE(t.stop_index.has_value());
    CHECK(t.stop_reason == "ncp");
    CHECK(t.iterations() == *t.stop_index + 3);
    // The recorded index minimizes the distance sequence seen so far.
    const auto& d = t.ncp_distances;
    for (double v : d) CHECK(d[*t.stop_index - 1] <= v);
  }
  SECTION("rule disabled runs to max_iter") {
    SolverOptions opts;
    opts.max_iter = 12;
    const SolverTrace t = ba_gmres(a, b_mat, rhs, x0, opts);
    CHECK(t.iterations() == 12);
    CHECK_FALSE(t.stop_index.has_value());
    CHECK(t.stop_reason == "max_iter");
  }
}

TEST_CASE("solver argument validation") {
  const SparseMatrix a = oracles::random_csr(8, 6, 0.5, 91);
  const SparseMatrix bt = transpose(a);
  const Vector rhs(8, 1.0);
  const Vector x0(6, 0.0);
  CHECK_THROWS_AS(ab_gmres(a, a, rhs, x0, SolverOptions{}), NumericalError);
  CHECK_THROWS_AS(ab_gmres(a, bt, Vector(7, 1.0), x0, SolverOptions{}),
                  NumericalError);
  CHECK_THROWS_AS(ba_gmres(a, bt, rhs, Vector(5, 0.0), SolverOptions{}),
                  NumericalError);
  SolverOptions zero_iter;
  zero_iter.max_iter = 0;
  CHECK_THROWS_AS(ba_gmres(a, bt, rhs, x0, zero_iter), ConfigError);
}
