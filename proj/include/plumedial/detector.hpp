#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "plumedial/geometry.hpp"

namespace plumedial {

// Angular acceptance around the retro direction -v0: a cone accepts arrival
// cosines in [cos(outer), 1], an annulus in [cos(outer), cos(inner)). A cone
// plus the matching annulus partitions the wider cone exactly, so tallies
// for "multiple FOVs" add up to the wide-FOV tally bin by bin.
struct FovAperture {
  double cos_outer = 1.0;
  double cos_inner = 1.0;
  bool is_annulus = false;

  static FovAperture cone(double half_angle) {
    if (half_angle <= 0.0 || half_angle > 0.5 * M_PI)
      throw std::invalid_argument("cone half-angle must lie in (0, pi/2]");
    FovAperture f;
    f.cos_outer = std::cos(half_angle);
    return f;
  }

  static FovAperture annulus(double inner_half_angle, double outer_half_angle) {
    if (!(0.0 < inner_half_angle && inner_half_angle < outer_half_angle &&
          outer_half_angle <= 0.5 * M_PI))
      throw std::invalid_argument("annulus needs 0 < inner < outer <= pi/2");
    FovAperture f;
    f.cos_outer = std::cos(outer_half_angle);
    f.cos_inner = std::cos(inner_half_angle);
    f.is_annulus = true;
    return f;
  }

  bool accepts(double cos_to_retro) const {
    if (cos_to_retro < cos_outer) return false;
    return is_annulus ? cos_to_retro < cos_inner : true;
  }

  double solid_angle() const {
    return 2.0 * M_PI * ((is_annulus ? cos_inner : 1.0) - cos_outer);
  }
};

struct Detector {
  Vec3 position;                        // x_D, above the ground plane
  Vec3 boresight{1.0, 0.0, 0.0};       // v0, unit
  double area = 7.0686e-4;              // A_D (m^2), 3 cm lens by default
  double efficiency = 1.0;
  std::vector<FovAperture> fov_apertures;
};

// Arrival-time histogram. Times are path lengths in metres (speed of light
// normalised to 1); the seconds-based view is provided for acquisition code.
struct TimeBinning {
  int n_bins = 0;
  double t_start = 0.0;  // m
  double dt = 1.0;       // m

  static constexpr double kSpeedOfLight = 2.99792458e8;  // m/s

  double t_end() const { return t_start + n_bins * dt; }
  double mid(int j) const { return t_start + (j + 0.5) * dt; }
  double dt_seconds() const { return dt / kSpeedOfLight; }

  // Bin index for an arrival time, or -1 outside the histogram.
  int bin_of(double t) const {
    if (t < t_start) return -1;
    const int j = static_cast<int>((t - t_start) / dt);
    return j < n_bins ? j : -1;
  }
};

}  // namespace plumedial
