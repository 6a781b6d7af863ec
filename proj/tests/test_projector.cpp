#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "ctkrylov/geometry.hpp"
#include "ctkrylov/phantom.hpp"
#include "ctkrylov/projector.hpp"
#include "oracles.hpp"

using namespace ctkrylov;

namespace {

// Stratified Monte Carlo estimate of the chord length of the ray's central
// line through the image square.
double mc_chord(const ScanGeometry& g, const Ray& ray, std::size_t samples,
                std::uint64_t seed) {
  const double reach = 2.0 * static_cast<double>(g.n_pixels);
  const double h = static_cast<double>(g.n_pixels) / 2.0;
  SplitMix64 rng(seed);
  std::size_t hits = 0;
  const double step = 2.0 * reach / static_cast<double>(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double s = -reach + (static_cast<double>(i) + rng.next_unit()) * step;
    const double x = ray.px + s * ray.dx;
    const double y = ray.py + s * ray.dy;
    if (std::abs(x) < h && std::abs(y) < h) ++hits;
  }
  return static_cast<double>(hits) * step;
}

// Same estimate for the full-width strip: mean chord across the strip width,
// which equals (overlap area) / det_width.
double mc_strip_coverage(const ScanGeometry& g, const Ray& ray,
                         std::size_t samples, std::uint64_t seed) {
  const double reach = 2.0 * static_cast<double>(g.n_pixels);
  const double h = static_cast<double>(g.n_pixels) / 2.0;
  // Detector axis is perpendicular to the beam.
  const double ux = ray.dy, uy = -ray.dx;
  SplitMix64 rng(seed);
  std::size_t hits = 0;
  const double step = 2.0 * reach / static_cast<double>(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double s = -reach + (static_cast<double>(i) + rng.next_unit()) * step;
    const double t = rng.next_uniform(-ray.half_width, ray.half_width);
    const double x = ray.px + s * ray.dx + t * ux;
    const double y = ray.py + s * ray.dy + t * uy;
    if (std::abs(x) < h && std::abs(y) < h) ++hits;
  }
  return static_cast<double>(hits) * step;
}

double row_sum(const SparseMatrix& m, std::size_t row) {
  double s = 0.0;
  for (std::size_t k = m.row_offsets[row]; k < m.row_offsets[row + 1]; ++k)
    s += m.values[k];
  return s;
}

const SparseMatrix& small_strip() {
  static const SparseMatrix m =
      build_matrix(standard_geometry(SizeClass::Small), ProjModel::Strip);
  return m;
}
const SparseMatrix& small_line() {
  static const SparseMatrix m =
      build_matrix(standard_geometry(SizeClass::Small), ProjModel::Line);
  return m;
}

}  // namespace

TEST_CASE("single-pixel unit cell") {
  ScanGeometry g;
  g.n_pixels = 1;
  g.angles_deg = {0.0};
  g.n_det = 1;
  const SparseMatrix line = build_matrix(g, ProjModel::Line);
  REQUIRE(line.nnz() == 1);
  CHECK(line.values[0] == Catch::Approx(1.0).margin(1e-14));
  const SparseMatrix strip = build_matrix(g, ProjModel::Strip);
  REQUIRE(strip.nnz() == 1);
  CHECK(strip.values[0] == Catch::Approx(1.0).margin(1e-14));
  const SparseMatrix joseph = build_matrix(g, ProjModel::Joseph);
  REQUIRE(joseph.nnz() == 1);
  CHECK(joseph.values[0] == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("row sums match the Monte Carlo ray-coverage oracle") {
  const ScanGeometry g = standard_geometry(SizeClass::Desk);
  SplitMix64 rng(2024);
  // Interior rays: detector indices in the middle half of the array.
  std::vector<std::pair<std::size_t, std::size_t>> rays;
  for (int i = 0; i < 20; ++i) {
    const auto a = static_cast<std::size_t>(rng.next_u64() % g.angles_deg.size());
    const auto d = static_cast<std::size_t>(g.n_det / 4 + rng.next_u64() % (g.n_det / 2));
    rays.emplace_back(a, d);
  }
  for (ProjModel model :
       {ProjModel::Line, ProjModel::Strip, ProjModel::Joseph}) {
    const SparseMatrix m = build_matrix(g, model);
    for (std::size_t i = 0; i < rays.size(); ++i) {
      const auto [a, d] = rays[i];
      const Ray ray = ray_of(g, a, d);
      const double got = row_sum(m, a * g.n_det + d);
      const double ref = model == ProjModel::Strip
                             ? mc_strip_coverage(g, ray, 100000, 900 + i)
                             : mc_chord(g, ray, 100000, 900 + i);
      INFO(to_string(model) << " angle " << a << " det " << d);
      CHECK(std::abs(got - ref) <= 0.01 * ref);
    }
  }
}

TEST_CASE("entries are nonnegative for all models") {
  const ScanGeometry g = standard_geometry(SizeClass::Desk);
  for (ProjModel model :
       {ProjModel::Line, ProjModel::Strip, ProjModel::Joseph}) {
    const SparseMatrix m = build_matrix(g, model);
    double lo = 1e300;
    for (double v : m.values) lo = std::min(lo, v);
    CHECK(lo > 0.0);
  }
}

TEST_CASE("strip converges to line as the detector width shrinks") {
  // 16x finer detector of width 1/16, offset by half a fine cell so fine
  // cell centers coincide with the coarse ones.
  ScanGeometry coarse;
  coarse.n_pixels = 32;
  coarse.angles_deg = {30.0};
  coarse.n_det = 32;
  ScanGeometry fine = coarse;
  fine.n_det = 32 * 16;
  fine.det_width = 1.0 / 16.0;
  fine.det_offset = 1.0 / 32.0;

  const SparseMatrix line = build_matrix(coarse, ProjModel::Line);
  const SparseMatrix strip = build_matrix(fine, ProjModel::Strip);
  std::size_t compared = 0;
  for (std::size_t d = 8; d < 24; ++d) {
    const std::size_t fine_d = 16 * d + 7;
    // Entries of the fine strip row vs the line row, where the line row is
    // well inside a pixel (entry > 0.2).
    std::vector<double> line_row(coarse.n_image(), 0.0);
    for (std::size_t k = line.row_offsets[d]; k < line.row_offsets[d + 1]; ++k)
      line_row[line.col_indices[k]] = line.values[k];
    for (std::size_t k = strip.row_offsets[fine_d];
         k < strip.row_offsets[fine_d + 1]; ++k) {
      const double lv = line_row[strip.col_indices[k]];
      if (lv > 0.2) {
        CHECK(strip.values[k] == Catch::Approx(lv).epsilon(0.05));
        ++compared;
      }
    }
  }
  CHECK(compared > 100);
}

TEST_CASE("quarter-turn rotation permutes the image") {
  ScanGeometry g = standard_geometry(SizeClass::Desk);
  g.angles_deg = {0.0, 14.0, 45.0, 71.0};
  ScanGeometry g2 = g;
  for (double& a : g2.angles_deg) a += 90.0;
  const std::size_t n = g.n_pixels;
  for (ProjModel model :
       {ProjModel::Line, ProjModel::Strip, ProjModel::Joseph}) {
    const SparseMatrix m1 = build_matrix(g, model);
    const SparseMatrix m2 = build_matrix(g2, model);
    REQUIRE(m1.nnz() == m2.nnz());
    // Rotating the beam by +90 deg equals rotating the image by -90 deg:
    // pixel (ix, iy) -> (iy, n-1-ix).
    for (std::size_t r = 0; r < m1.rows; ++r) {
      std::vector<std::pair<std::size_t, double>> mapped;
      for (std::size_t k = m2.row_offsets[r]; k < m2.row_offsets[r + 1]; ++k) {
        const std::size_t col = m2.col_indices[k];
        const std::size_t ix = col % n, iy = col / n;
        const std::size_t jx = iy, jy = n - 1 - ix;
        mapped.emplace_back(jy * n + jx, m2.values[k]);
      }
      std::sort(mapped.begin(), mapped.end());
      const std::size_t nn = m1.row_offsets[r + 1] - m1.row_offsets[r];
      REQUIRE(mapped.size() == nn);
      for (std::size_t k = 0; k < nn; ++k) {
        REQUIRE(mapped[k].first == m1.col_indices[m1.row_offsets[r] + k]);
        REQUIRE(std::abs(mapped[k].second - m1.values[m1.row_offsets[r] + k]) <=
                1e-12);
      }
    }
  }
}

TEST_CASE("build_pair") {
  const ScanGeometry g = standard_geometry(SizeClass::Desk);
  SECTION("matched pair is an exact transpose") {
    const ProjectorPair p = build_pair(g, ProjModel::Strip, ProjModel::Strip);
    CHECK(unmatchedness(p) == 0.0);
    CHECK(p.label_A == "strip");
    CHECK(p.label_B == "strip^T");
  }
  SECTION("different models give a strictly positive difference") {
    const ProjectorPair p = build_pair(g, ProjModel::Strip, ProjModel::Line);
    CHECK(unmatchedness(p) > 0.0);
  }
}

TEST_CASE("relative model difference is stable across problem sizes") {
  const ScanGeometry desk = standard_geometry(SizeClass::Desk);
  const SparseMatrix as_desk = build_matrix(desk, ProjModel::Strip);
  const SparseMatrix al_desk = build_matrix(desk, ProjModel::Line);
  const double rel_desk =
      frob_diff(as_desk, al_desk) / frob_norm(as_desk);
  const double rel_small =
      frob_diff(small_strip(), small_line()) / frob_norm(small_strip());
  CHECK(std::abs(rel_small - rel_desk) < 0.05);
}

TEST_CASE("unmatchedness") {
  const ScanGeometry g = standard_geometry(SizeClass::Desk);
  const SparseMatrix a = build_matrix(g, ProjModel::Strip);
  SECTION("matched gives zero") {
    ProjectorPair p{a, transpose(a), "s", "s^T"};
    CHECK(unmatchedness(p) == 0.0);
  }
  SECTION("scaling gives the norm ratio") {
    SparseMatrix b = transpose(a);
    for (double& v : b.values) v *= 2.0;
    ProjectorPair p{a, b, "s", "2s^T"};
    CHECK(unmatchedness(p) == Catch::Approx(1.0).epsilon(1e-12));
  }
  SECTION("strip/line difference is near the reported scale") {
    ProjectorPair p{small_strip(), transpose(small_line()), "s", "l^T"};
    const double u = unmatchedness(p);
    CHECK(u > 0.37 - 0.15);
    CHECK(u < 0.37 + 0.15);
  }
  SECTION("shape mismatch is rejected") {
    ProjectorPair p{a, a, "s", "s"};
    CHECK_THROWS_AS(unmatchedness(p), NumericalError);
  }
}

TEST_CASE("thresholded transpose") {
  const ScanGeometry g = standard_geometry(SizeClass::Desk);
  const SparseMatrix a = build_matrix(g, ProjModel::Strip);
  SECTION("tau = 0 is the exact transpose") {
    const SparseMatrix b = threshold_transpose(a, 0.0);
    const SparseMatrix t = transpose(a);
    CHECK(b.row_offsets == t.row_offsets);
    CHECK(b.col_indices == t.col_indices);
    CHECK(b.values == t.values);
  }
  SECTION("tau > 1 drops everything") {
    CHECK(threshold_transpose(a, 1.0 + 1e-12).nnz() == 0);
  }
  SECTION("tau = 1 keeps only maximal entries") {
    const SparseMatrix b = threshold_transpose(a, 1.0);
    double maxv = 0.0;
    for (double v : a.values) maxv = std::max(maxv, v);
    CHECK(b.nnz() > 0);
    for (double v : b.values) CHECK(v >= maxv);
  }
  SECTION("unmatchedness is nondecreasing in tau") {
    double prev = -1.0;
    for (double tau : {0.0, 0.01, 0.1, 0.3, 0.5}) {
      ProjectorPair p{a, threshold_transpose(a, tau), "s", "tau"};
      const double u = unmatchedness(p);
      CHECK(u >= prev);
      prev = u;
    }
  }
  SECTION("negative entries are rejected") {
    const SparseMatrix neg =
        csr_from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, -1.0}});
    CHECK_THROWS_AS(threshold_transpose(neg, 0.1), NumericalError);
  }
}

TEST_CASE("matrix market round trip preserves the projector exactly") {
  const ScanGeometry g = standard_geometry(SizeClass::Desk);
  const SparseMatrix a = build_matrix(g, ProjModel::Strip);
  const auto path =
      (std::filesystem::temp_directory_path() / "ctk_strip_desk.mtx").string();
  mm_write(a, path);
  const SparseMatrix r = mm_read(path);
  CHECK(r.nnz() == a.nnz());
  CHECK(r.values == a.values);
  std::filesystem::remove(path);
}
