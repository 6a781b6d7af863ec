#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ctkrylov/errors.hpp"
#include "ctkrylov/rng.hpp"
#include "ctkrylov/sparse.hpp"

namespace ctkrylov {

/// Ground-truth image with values in [0, 1], generated deterministically
/// from (kind, n, seed).
struct Phantom {
  std::size_t n = 0;
  Vector values;  // length n * n, row i is y index from the bottom
};

enum class PhantomKind { ThreePhases, SheppLogan };

inline PhantomKind phantom_kind_from_name(const std::string& name) {
  if (name == "threephases") return PhantomKind::ThreePhases;
  if (name == "sheppLogan" || name == "shepplogan") return PhantomKind::SheppLogan;
  throw ConfigError("unknown phantom kind: " + name);
}

namespace detail {

inline void fill_disk(Phantom& p, double cx, double cy, double r, double val) {
  const double h = static_cast<double>(p.n) / 2.0;
  for (std::size_t iy = 0; iy < p.n; ++iy) {
    const double y = -h + static_cast<double>(iy) + 0.5;
    for (std::size_t ix = 0; ix < p.n; ++ix) {
      const double x = -h + static_cast<double>(ix) + 0.5;
      const double dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= r * r) p.values[iy * p.n + ix] = val;
    }
  }
}

inline void fill_ellipse(Phantom& p, double cx, double cy, double a, double b,
                         double val) {
  const double h = static_cast<double>(p.n) / 2.0;
  for (std::size_t iy = 0; iy < p.n; ++iy) {
    const double y = -h + static_cast<double>(iy) + 0.5;
    for (std::size_t ix = 0; ix < p.n; ++ix) {
      const double x = -h + static_cast<double>(ix) + 0.5;
      const double dx = (x - cx) / a, dy = (y - cy) / b;
      if (dx * dx + dy * dy <= 1.0) p.values[iy * p.n + ix] = val;
    }
  }
}

inline Phantom three_phases(std::size_t n, std::uint64_t seed) {
  Phantom p;
  p.n = n;
  p.values.assign(n * n, 0.0);
  SplitMix64 rng(seed);
  const double dn = static_cast<double>(n);
  const double scale2 = (dn / 128.0) * (dn / 128.0);
  const auto n_small = static_cast<std::size_t>(std::llround(60.0 * scale2));
  const auto n_mid = static_cast<std::size_t>(std::llround(12.0 * scale2));
  const double center_r = 0.45 * dn;
  for (std::size_t i = 0; i < n_small; ++i) {
    double cx, cy;
    rng.next_in_disk(center_r, cx, cy);
    const double r = rng.next_uniform(0.01, 0.03) * dn;
    fill_disk(p, cx, cy, r, 0.35);
  }
  for (std::size_t i = 0; i < n_mid; ++i) {
    double cx, cy;
    rng.next_in_disk(center_r, cx, cy);
    const double a = rng.next_uniform(0.05, 0.15) * dn;
    const double b = rng.next_uniform(0.05, 0.15) * dn;
    fill_ellipse(p, cx, cy, a, b, 0.7);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    double cx, cy;
    rng.next_in_disk(center_r, cx, cy);
    const double r = rng.next_uniform(0.1, 0.2) * dn;
    fill_disk(p, cx, cy, r, 1.0);
  }
  // Zero outside the circle inscribed in the image square.
  const double h = dn / 2.0;
  for (std::size_t iy = 0; iy < n; ++iy) {
    const double y = -h + static_cast<double>(iy) + 0.5;
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double x = -h + static_cast<double>(ix) + 0.5;
      if (x * x + y * y > h * h) p.values[iy * n + ix] = 0.0;
    }
  }
  return p;
}

struct SlEllipse {
  double value, a, b, x0, y0, phi_deg;
};

inline Phantom shepp_logan(std::size_t n) {
  // Classic ten-ellipse head phantom on [-1, 1]^2; per-pixel sums are
  // clipped to [0, 1].
  static const SlEllipse table[10] = {
      {2.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.98, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
      {-0.02, 0.1100, 0.3100, 0.22, 0.0, -18.0},
      {-0.02, 0.1600, 0.4100, -0.22, 0.0, 18.0},
      {0.01, 0.2100, 0.2500, 0.0, 0.35, 0.0},
      {0.01, 0.0460, 0.0460, 0.0, 0.1, 0.0},
      {0.01, 0.0460, 0.0460, 0.0, -0.1, 0.0},
      {0.01, 0.0460, 0.0230, -0.08, -0.605, 0.0},
      {0.01, 0.0230, 0.0230, 0.0, -0.606, 0.0},
      {0.01, 0.0230, 0.0460, 0.06, -0.605, 0.0},
  };
  Phantom p;
  p.n = n;
  p.values.assign(n * n, 0.0);
  const double dn = static_cast<double>(n);
  for (std::size_t iy = 0; iy < n; ++iy) {
    const double y = (static_cast<double>(iy) + 0.5) * 2.0 / dn - 1.0;
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double x = (static_cast<double>(ix) + 0.5) * 2.0 / dn - 1.0;
      double v = 0.0;
      for (const SlEllipse& e : table) {
        const double t = e.phi_deg * 3.14159265358979323846 / 180.0;
        const double c = std::cos(t), s = std::sin(t);
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = (c * dx + s * dy) / e.a;
        const double w = (-s * dx + c * dy) / e.b;
        if (u * u + w * w <= 1.0) v += e.value;
      }
      p.values[iy * n + ix] = std::clamp(v, 0.0, 1.0);
    }
  }
  return p;
}

}  // namespace detail

inline Phantom make_phantom(PhantomKind kind, std::size_t n,
                            std::uint64_t seed) {
  if (n < 8) throw ConfigError("make_phantom: n must be >= 8");
  switch (kind) {
    case PhantomKind::ThreePhases: return detail::three_phases(n, seed);
    case PhantomKind::SheppLogan: return detail::shepp_logan(n);
  }
  throw ConfigError("make_phantom: unknown kind");
}

/// Noise-free data synthesized with the same model used for reconstruction.
inline Vector synth_sinogram(const SparseMatrix& a, const Phantom& xbar) {
  if (a.cols != xbar.values.size())
    throw NumericalError("synth_sinogram: matrix/phantom dimension mismatch");
  return matvec(a, xbar.values);
}

/// Relative Gaussian noise specification: ||e|| / ||b_exact|| = rel_level.
struct NoiseSpec {
  double rel_level = 0.0;
  std::uint64_t seed = 0;
};

/// Adds white Gaussian noise rescaled so the relative level is met exactly.
/// Returns the noisy data and the exact noise norm rel_level * ||b_exact||.
inline std::pair<Vector, double> add_noise(const Vector& b_exact,
                                           const NoiseSpec& spec) {
  if (spec.rel_level < 0.0) throw ConfigError("add_noise: negative noise level");
  if (spec.rel_level == 0.0) return {b_exact, 0.0};
  const double bnorm = norm2(b_exact);
  if (bnorm == 0.0)
    throw NumericalError("add_noise: zero data with positive noise level");
  SplitMix64 rng(spec.seed);
  Vector g(b_exact.size());
  for (double& v : g) v = rng.next_gaussian();
  const double factor = spec.rel_level * bnorm / norm2(g);
  Vector b = b_exact;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += factor * g[i];
  return {b, spec.rel_level * bnorm};
}

/// 16-bit text PGM (P2); values are clipped to [0, 1] then mapped linearly
/// to 0..65535. Rows are written top-down.
inline void write_pgm(const Vector& image, std::size_t n,
                      const std::string& path) {
  if (image.size() != n * n) throw IoError("write_pgm: image size mismatch");
  std::ofstream out(path);
  if (!out) throw IoError("write_pgm: cannot open " + path);
  out << "P2\n" << n << " " << n << "\n65535\n";
  for (std::size_t iy = n; iy-- > 0;) {
    for (std::size_t ix = 0; ix < n; ++ix) {
      const double v = std::clamp(image[iy * n + ix], 0.0, 1.0);
      out << static_cast<int>(std::lround(v * 65535.0));
      out << (ix + 1 == n ? '\n' : ' ');
    }
  }
  if (!out) throw IoError("write_pgm: write failure on " + path);
}

}  // namespace ctkrylov
