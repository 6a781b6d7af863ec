#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "ctkrylov/errors.hpp"
#include "ctkrylov/sparse.hpp"

namespace ctkrylov {

enum class StopRule { None, DP, NCP };

/// Configuration of the iteration-termination rules. The DP rule needs the
/// (exact or estimated) noise norm; the NCP rule needs the sinogram layout
/// to reshape the residual.
struct StoppingConfig {
  StopRule rule = StopRule::None;
  double dp_tau = 1.0;       // safety factor, >= 1 by convention
  double noise_norm = -1.0;  // ||e||_2; negative means unset
  std::size_t ncp_patience = 3;
  std::size_t n_det = 0;  // residual layout for NCP
  std::size_t n_ang = 0;

  bool has_noise_norm() const { return noise_norm >= 0.0; }
  bool has_layout() const { return n_det > 0 && n_ang > 0; }
};

/// Discrepancy principle: stop as soon as ||b - A x_k|| <= tau * ||e||.
inline bool dp_check(double resnorm, const StoppingConfig& cfg) {
  if (!cfg.has_noise_norm())
    throw ConfigError("dp_check: DP requires noise_norm to be set");
  return resnorm <= cfg.dp_tau * cfg.noise_norm;
}

/// Normalized-cumulative-periodogram distance of the residual from white
/// noise. The residual is reshaped into an n_det x n_ang sinogram and each
/// angle column is analyzed separately; the returned value is the mean over
/// columns of the 2-norm distance between the column's NCP and the flat
/// white-noise ramp. An all-zero spectrum counts as fully white (distance 0).
inline double ncp_distance(const Vector& residual, std::size_t n_det,
                           std::size_t n_ang) {
  if (residual.size() != n_det * n_ang)
    throw ConfigError("ncp_distance: residual length does not match layout");
  const std::size_t q = n_det / 2;
  if (q == 0) return 0.0;
  const double two_pi = 2.0 * 3.14159265358979323846;
  std::vector<double> pgram(q);
  double total_dist = 0.0;
  for (std::size_t a = 0; a < n_ang; ++a) {
    const double* col = residual.data() + a * n_det;
    double mass = 0.0, energy = 0.0;
    for (std::size_t j = 0; j < n_det; ++j) energy += col[j] * col[j];
    for (std::size_t k = 1; k <= q; ++k) {  // DC term excluded
      double re = 0.0, im = 0.0;
      for (std::size_t j = 0; j < n_det; ++j) {
        const double phi = two_pi * static_cast<double>(k) *
                           static_cast<double>(j) / static_cast<double>(n_det);
        re += col[j] * std::cos(phi);
        im -= col[j] * std::sin(phi);
      }
      pgram[k - 1] = re * re + im * im;
      mass += pgram[k - 1];
    }
    // A spectrum that is zero up to rounding counts as fully white.
    if (mass <= 1e-20 * energy) continue;
    double cum = 0.0, dist2 = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      cum += pgram[k];
      const double cwhite =
          static_cast<double>(k + 1) / static_cast<double>(q);
      const double d = cum / mass - cwhite;
      dist2 += d * d;
    }
    total_dist += std::sqrt(dist2);
  }
  return total_dist / static_cast<double>(n_ang);
}

/// Minimum detector for the noisy NCP distance sequence: once the distance
/// has exceeded its running minimum for `patience` consecutive iterations,
/// returns the 1-based index of that minimum.
inline std::optional<std::size_t> ncp_stop(const std::vector<double>& distances,
                                           std::size_t patience) {
  if (distances.empty()) return std::nullopt;
  double best = distances[0];
  std::size_t best_idx = 0;
  std::size_t worse_streak = 0;
  for (std::size_t i = 1; i < distances.size(); ++i) {
    if (distances[i] < best) {
      best = distances[i];
      best_idx = i;
      worse_streak = 0;
    } else {
      ++worse_streak;
      if (worse_streak >= patience) return best_idx + 1;
    }
  }
  return std::nullopt;
}

}  // namespace ctkrylov
