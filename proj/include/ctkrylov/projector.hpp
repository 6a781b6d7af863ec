#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ctkrylov/geometry.hpp"
#include "ctkrylov/parallel.hpp"
#include "ctkrylov/sparse.hpp"

namespace ctkrylov {

/// Discretization model of the forward projector.
enum class ProjModel { Line, Strip, Joseph };

inline std::string to_string(ProjModel m) {
  switch (m) {
    case ProjModel::Line: return "line";
    case ProjModel::Strip: return "strip";
    case ProjModel::Joseph: return "joseph";
  }
  return "?";
}

inline ProjModel model_from_name(const std::string& name) {
  if (name == "line") return ProjModel::Line;
  if (name == "strip") return ProjModel::Strip;
  if (name == "joseph") return ProjModel::Joseph;
  throw ConfigError("unknown projector model: " + name);
}

namespace detail {

// Contributions below this are treated as boundary-grazing and dropped.
constexpr double kGrazeEps = 1e-12;

using RowEntries = std::vector<std::pair<std::size_t, double>>;

/// Chord lengths of the ray's central line through each pixel (Siddon-style
/// breakpoint traversal).
inline void line_row(const ScanGeometry& g, const Ray& ray, RowEntries& out) {
  const double h = static_cast<double>(g.n_pixels) / 2.0;
  const std::size_t n = g.n_pixels;
  double s0 = -std::numeric_limits<double>::infinity();
  double s1 = std::numeric_limits<double>::infinity();
  const double p[2] = {ray.px, ray.py};
  const double d[2] = {ray.dx, ray.dy};
  for (int ax = 0; ax < 2; ++ax) {
    if (std::abs(d[ax]) < 1e-15) {
      if (std::abs(p[ax]) >= h) return;  // parallel and outside the slab
    } else {
      double a = (-h - p[ax]) / d[ax];
      double b = (h - p[ax]) / d[ax];
      if (a > b) std::swap(a, b);
      s0 = std::max(s0, a);
      s1 = std::min(s1, b);
    }
  }
  if (!(s1 - s0 > kGrazeEps)) return;
  std::vector<double> brk;
  brk.reserve(2 * n + 2);
  brk.push_back(s0);
  brk.push_back(s1);
  for (int ax = 0; ax < 2; ++ax) {
    if (std::abs(d[ax]) < 1e-15) continue;
    for (std::size_t k = 1; k < n; ++k) {
      const double s = (-h + static_cast<double>(k) - p[ax]) / d[ax];
      if (s > s0 + kGrazeEps && s < s1 - kGrazeEps) brk.push_back(s);
    }
  }
  std::sort(brk.begin(), brk.end());
  for (std::size_t t = 0; t + 1 < brk.size(); ++t) {
    const double len = brk[t + 1] - brk[t];
    if (len <= kGrazeEps) continue;
    const double sm = 0.5 * (brk[t] + brk[t + 1]);
    const double mx = ray.px + sm * ray.dx + h;
    const double my = ray.py + sm * ray.dy + h;
    const auto ix = static_cast<std::ptrdiff_t>(std::floor(mx));
    const auto iy = static_cast<std::ptrdiff_t>(std::floor(my));
    if (ix < 0 || iy < 0 || ix >= static_cast<std::ptrdiff_t>(n) ||
        iy >= static_cast<std::ptrdiff_t>(n))
      continue;
    out.emplace_back(static_cast<std::size_t>(iy) * n +
                         static_cast<std::size_t>(ix),
                     len);
  }
  std::sort(out.begin(), out.end());
}

/// Area of the pixel square clipped to the slab lo <= u . p <= hi
/// (Sutherland-Hodgman against the two half-planes).
inline double slab_pixel_area(double cx, double cy, double ux, double uy,
                              double lo, double hi) {
  double xs[8], ys[8];
  double tx[8], ty[8];
  xs[0] = cx - 0.5; ys[0] = cy - 0.5;
  xs[1] = cx + 0.5; ys[1] = cy - 0.5;
  xs[2] = cx + 0.5; ys[2] = cy + 0.5;
  xs[3] = cx - 0.5; ys[3] = cy + 0.5;
  int nv = 4;
  // side = +1 keeps u.p >= bound, side = -1 keeps u.p <= bound.
  auto clip = [&](double bound, double side) {
    int nw = 0;
    for (int i = 0; i < nv; ++i) {
      const int j = (i + 1) % nv;
      const double fi = side * (ux * xs[i] + uy * ys[i] - bound);
      const double fj = side * (ux * xs[j] + uy * ys[j] - bound);
      if (fi >= 0.0) {
        tx[nw] = xs[i];
        ty[nw] = ys[i];
        ++nw;
      }
      if ((fi > 0.0 && fj < 0.0) || (fi < 0.0 && fj > 0.0)) {
        const double t = fi / (fi - fj);
        tx[nw] = xs[i] + t * (xs[j] - xs[i]);
        ty[nw] = ys[i] + t * (ys[j] - ys[i]);
        ++nw;
      }
    }
    for (int i = 0; i < nw; ++i) {
      xs[i] = tx[i];
      ys[i] = ty[i];
    }
    nv = nw;
  };
  clip(lo, +1.0);
  if (nv < 3) return 0.0;
  clip(hi, -1.0);
  if (nv < 3) return 0.0;
  double area2 = 0.0;
  for (int i = 0; i < nv; ++i) {
    const int j = (i + 1) % nv;
    area2 += xs[i] * ys[j] - xs[j] * ys[i];
  }
  return 0.5 * std::abs(area2);
}

/// All rows of one angle under the strip model: for every pixel, exact
/// overlap areas with the detector slabs it projects onto, divided by the
/// detector width so entries stay in length units.
inline void strip_angle(const ScanGeometry& g, std::size_t angle_index,
                        std::vector<RowEntries>& rows) {
  const std::size_t n = g.n_pixels;
  const double h = static_cast<double>(n) / 2.0;
  const double t = g.angles_deg[angle_index] * kPi / 180.0;
  const double ux = std::cos(t), uy = std::sin(t);
  const double w = g.det_width;
  const double halfspan = (std::abs(ux) + std::abs(uy)) / 2.0;
  const double dc = (static_cast<double>(g.n_det) - 1.0) / 2.0;
  for (std::size_t iy = 0; iy < n; ++iy) {
    const double cy = -h + static_cast<double>(iy) + 0.5;
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double cx = -h + static_cast<double>(ix) + 0.5;
      const double proj = ux * cx + uy * cy;
      const double lo = (proj - halfspan - w / 2.0 - g.det_offset) / w + dc;
      const double hi = (proj + halfspan + w / 2.0 - g.det_offset) / w + dc;
      auto d0 = static_cast<std::ptrdiff_t>(std::ceil(lo));
      auto d1 = static_cast<std::ptrdiff_t>(std::floor(hi));
      d0 = std::max<std::ptrdiff_t>(d0, 0);
      d1 = std::min<std::ptrdiff_t>(d1, static_cast<std::ptrdiff_t>(g.n_det) - 1);
      for (std::ptrdiff_t d = d0; d <= d1; ++d) {
        const double td =
            (static_cast<double>(d) - dc) * w + g.det_offset;
        const double area =
            slab_pixel_area(cx, cy, ux, uy, td - w / 2.0, td + w / 2.0);
        const double val = area / w;
        if (val > kGrazeEps)
          rows[static_cast<std::size_t>(d)].emplace_back(iy * n + ix, val);
      }
    }
  }
}

/// Joseph interpolation row: step along the dominant axis one pixel
/// row/column at a time, linear weights on the two straddling pixels,
/// scaled by the step length.
inline void joseph_row(const ScanGeometry& g, const Ray& ray, RowEntries& out) {
  const std::size_t n = g.n_pixels;
  const double h = static_cast<double>(n) / 2.0;
  const bool drive_y = std::abs(ray.dy) > std::abs(ray.dx);  // tie steps in x
  const double scale = 1.0 / std::max(std::abs(ray.dx), std::abs(ray.dy));
  for (std::size_t k = 0; k < n; ++k) {
    double cross;  // interpolation coordinate in pixel-center units
    if (drive_y) {
      const double y = -h + static_cast<double>(k) + 0.5;
      cross = ray.px + (y - ray.py) * (ray.dx / ray.dy) + h - 0.5;
    } else {
      const double x = -h + static_cast<double>(k) + 0.5;
      cross = ray.py + (x - ray.px) * (ray.dy / ray.dx) + h - 0.5;
    }
    const double fl = std::floor(cross);
    const auto j0 = static_cast<std::ptrdiff_t>(fl);
    const double frac = cross - fl;
    const double w0 = (1.0 - frac) * scale;
    const double w1 = frac * scale;
    auto deposit = [&](std::ptrdiff_t j, double wgt) {
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(n) || wgt <= kGrazeEps)
        return;
      const std::size_t jj = static_cast<std::size_t>(j);
      out.emplace_back(drive_y ? k * n + jj : jj * n + k, wgt);
    };
    deposit(j0, w0);
    deposit(j0 + 1, w1);
  }
  std::sort(out.begin(), out.end());
}

inline SparseMatrix assemble_rows(std::size_t rows_count, std::size_t cols,
                                  const std::vector<RowEntries>& rows) {
  SparseMatrix m;
  m.rows = rows_count;
  m.cols = cols;
  m.row_offsets.assign(rows_count + 1, 0);
  std::size_t nnz = 0;
  for (std::size_t i = 0; i < rows_count; ++i) {
    nnz += rows[i].size();
    m.row_offsets[i + 1] = nnz;
  }
  m.col_indices.resize(nnz);
  m.values.resize(nnz);
  std::size_t pos = 0;
  for (const RowEntries& r : rows)
    for (const auto& [c, v] : r) {
      m.col_indices[pos] = c;
      m.values[pos] = v;
      ++pos;
    }
  return m;
}

}  // namespace detail

/// Builds the m x n system matrix for the given discretization model.
/// The row of ray (a, d) is a * n_det + d; rays that miss the image leave
/// empty rows.
inline SparseMatrix build_matrix(const ScanGeometry& g, ProjModel model) {
  g.check();
  const std::size_t m = g.n_rays();
  std::vector<detail::RowEntries> rows(m);
  if (model == ProjModel::Strip) {
    parallel_for(0, g.angles_deg.size(), [&](std::size_t a) {
      std::vector<detail::RowEntries> block(g.n_det);
      detail::strip_angle(g, a, block);
      for (std::size_t d = 0; d < g.n_det; ++d)
        rows[a * g.n_det + d] = std::move(block[d]);
    });
  } else {
    parallel_for(0, m, [&](std::size_t r) {
      const Ray ray = ray_of(g, r / g.n_det, r % g.n_det);
      if (model == ProjModel::Line)
        detail::line_row(g, ray, rows[r]);
      else
        detail::joseph_row(g, ray, rows[r]);
    });
  }
  return detail::assemble_rows(m, g.n_image(), rows);
}

/// Forward projector A together with an (often unmatched) back projector B.
struct ProjectorPair {
  SparseMatrix A;  // m x n
  SparseMatrix B;  // n x m
  std::string label_A;
  std::string label_B;
};

inline ProjectorPair build_pair(const ScanGeometry& g, ProjModel model_a,
                                ProjModel model_b) {
  ProjectorPair p;
  p.A = build_matrix(g, model_a);
  p.B = transpose(build_matrix(g, model_b));
  p.label_A = to_string(model_a);
  p.label_B = to_string(model_b) + "^T";
  return p;
}

/// B_tau: the transpose of A with entries below tau * max(A) dropped.
/// tau = 0 returns the exact transpose.
inline SparseMatrix threshold_transpose(const SparseMatrix& a, double tau) {
  if (tau < 0.0) throw ConfigError("threshold_transpose: tau must be >= 0");
  double maxv = 0.0;
  for (double v : a.values) {
    if (v < 0.0)
      throw NumericalError(
          "threshold_transpose: matrix has negative entries; the thresholding "
          "rule assumes nonnegative projector weights");
    maxv = std::max(maxv, v);
  }
  const double cut = tau * maxv;
  SparseMatrix t = transpose(a);
  if (tau == 0.0) return t;
  SparseMatrix out;
  out.rows = t.rows;
  out.cols = t.cols;
  out.row_offsets.assign(t.rows + 1, 0);
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (std::size_t k = t.row_offsets[i]; k < t.row_offsets[i + 1]; ++k) {
      if (t.values[k] >= cut) {
        out.col_indices.push_back(t.col_indices[k]);
        out.values.push_back(t.values[k]);
      }
    }
    out.row_offsets[i + 1] = out.col_indices.size();
  }
  return out;
}

/// || B - A^T ||_F / || A ||_F.
inline double unmatchedness(const ProjectorPair& p) {
  if (p.A.rows != p.B.cols || p.A.cols != p.B.rows)
    throw NumericalError("unmatchedness: pair shapes do not conform");
  return frob_diff(p.B, transpose(p.A)) / frob_norm(p.A);
}

}  // namespace ctkrylov
