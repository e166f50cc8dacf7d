#pragma once

#include <cmath>

namespace pwinv::profiles {

/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

/// Smoothed indicator of [a, b]: 1 on [a + r, b - r], 0 outside [a - r, b + r].
inline double mollified_indicator(double s, double a, double b, double r) {
  if (r <= 0.0) return (s >= a && s <= b) ? 1.0 : 0.0;
  return smooth_step((s - a + r) / (2.0 * r)) *
         smooth_step((b + r - s) / (2.0 * r));
}

/// Compactly supported bump with peak 1 at r = 0 and support radius R.
inline double compact_bump(double r, double R) {
  const double q = r / R;
  if (q >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - q * q));
}

/// 1 for r <= r0, 0 for r >= r1, smooth in between.
inline double radial_cutoff(double r, double r0, double r1) {
  return 1.0 - smooth_step((r - r0) / (r1 - r0));
}

inline double gaussian(double r2, double width) {
  return std::exp(-0.5 * r2 / (width * width));
}

}  // namespace pwinv::profiles
