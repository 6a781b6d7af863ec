#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ctkrylov/errors.hpp"

namespace ctkrylov {

/// 2D parallel-beam scan configuration. The image is n_pixels x n_pixels with
/// unit pixel side, centered at the origin; the detector array is centered on
/// the origin and rotates with the beam.
struct ScanGeometry {
  std::size_t n_pixels = 0;
  std::vector<double> angles_deg;
  std::size_t n_det = 0;
  double det_width = 1.0;
  double det_offset = 0.0;

  std::size_t n_rays() const { return angles_deg.size() * n_det; }
  std::size_t n_image() const { return n_pixels * n_pixels; }

  void check() const {
    if (n_pixels < 1) throw ConfigError("geometry: n_pixels must be >= 1");
    if (n_det < 1) throw ConfigError("geometry: n_det must be >= 1");
    if (angles_deg.empty()) throw ConfigError("geometry: angle set is empty");
    if (!(det_width > 0.0)) throw ConfigError("geometry: det_width must be > 0");
  }
};

inline std::vector<double> angle_range(double start_deg, double step_deg,
                                       std::size_t count) {
  std::vector<double> a(count);
  for (std::size_t i = 0; i < count; ++i) a[i] = start_deg + step_deg * i;
  return a;
}

enum class SizeClass { Small, Large, Desk };

/// Canonical test geometries. Small and large match the published scan
/// parameters; desk is the reduced size used throughout the test suite.
inline ScanGeometry standard_geometry(SizeClass size) {
  ScanGeometry g;
  switch (size) {
    case SizeClass::Small:
      g.n_pixels = 128;
      g.angles_deg = angle_range(0.0, 1.0, 180);
      g.n_det = 128;
      break;
    case SizeClass::Large:
      g.n_pixels = 420;
      g.angles_deg = angle_range(0.0, 0.3, 600);
      g.n_det = 420;
      break;
    case SizeClass::Desk:
      g.n_pixels = 64;
      g.angles_deg = angle_range(0.0, 2.0, 90);
      g.n_det = 64;
      break;
  }
  return g;
}

inline SizeClass size_class_from_name(const std::string& name) {
  if (name == "small") return SizeClass::Small;
  if (name == "large") return SizeClass::Large;
  if (name == "desk") return SizeClass::Desk;
  throw ConfigError("unknown geometry size class: " + name);
}

/// Central line of one detector cell: point on the detector axis, unit beam
/// direction, and half the cell width.
struct Ray {
  double px, py;  // point the ray passes through
  double dx, dy;  // unit direction (-sin t, cos t)
  double half_width;
};

constexpr double kPi = 3.14159265358979323846;

/// Beam direction is measured counterclockwise from the +y axis; the detector
/// axis (cos t, sin t) is perpendicular to the beam.
inline Ray ray_of(const ScanGeometry& g, std::size_t angle_index,
                  std::size_t det_index) {
  if (angle_index >= g.angles_deg.size())
    throw ConfigError("ray_of: angle index out of range");
  if (det_index >= g.n_det) throw ConfigError("ray_of: detector index out of range");
  const double t = g.angles_deg[angle_index] * kPi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  const double u = (static_cast<double>(det_index) -
                    (static_cast<double>(g.n_det) - 1.0) / 2.0) *
                       g.det_width +
                   g.det_offset;
  return Ray{u * c, u * s, -s, c, g.det_width / 2.0};
}

}  // namespace ctkrylov
