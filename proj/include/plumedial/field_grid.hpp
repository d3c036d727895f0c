#pragma once

#include <cmath>
#include <stdexcept>

#include "plumedial/dispersion.hpp"
#include "plumedial/geometry.hpp"

namespace plumedial {

// Rectilinear evaluation grid for comparing concentration fields.
struct FieldGrid {
  Vec3 lo, hi;
  int nx = 48, ny = 48, nz = 24;

  double cell_volume() const {
    return (hi.x - lo.x) / nx * (hi.y - lo.y) / ny * (hi.z - lo.z) / nz;
  }

  Vec3 point(int i, int j, int k) const {
    return {lo.x + (i + 0.5) * (hi.x - lo.x) / nx, lo.y + (j + 0.5) * (hi.y - lo.y) / ny,
            lo.z + (k + 0.5) * (hi.z - lo.z) / nz};
  }

  template <typename Fn>
  double integrate(Fn&& f) const {
    double acc = 0.0;
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j)
        for (int k = 0; k < nz; ++k) acc += f(point(i, j, k));
    return acc * cell_volume();
  }

  // Grid that covers the kernels of a field with the given padding in
  // bandwidths.
  static FieldGrid covering(const KernelField& field, double pad_sigmas = 5.0) {
    if (field.kernels.empty()) throw std::invalid_argument("FieldGrid: empty field");
    FieldGrid g;
    g.lo = Vec3(1e300, 1e300, 1e300);
    g.hi = Vec3(-1e300, -1e300, -1e300);
    for (const GaussianPuff& k : field.kernels) {
      const double pad = pad_sigmas * k.bandwidth;
      g.lo.x = std::min(g.lo.x, k.center.x - pad);
      g.lo.y = std::min(g.lo.y, k.center.y - pad);
      g.lo.z = std::min(g.lo.z, k.center.z - pad);
      g.hi.x = std::max(g.hi.x, k.center.x + pad);
      g.hi.y = std::max(g.hi.y, k.center.y + pad);
      g.hi.z = std::max(g.hi.z, k.center.z + pad);
    }
    return g;
  }
};

// Relative L1 distance between two fields on a grid, normalised by the mass
// of the reference: int |a - b| / int b.
inline double l1_divergence(const KernelField& candidate, const KernelField& reference,
                            const FieldGrid& grid) {
  double diff = 0.0, mass = 0.0;
  for (int i = 0; i < grid.nx; ++i)
    for (int j = 0; j < grid.ny; ++j)
      for (int k = 0; k < grid.nz; ++k) {
        const Vec3 x = grid.point(i, j, k);
        const double a = candidate.evaluate(x) - candidate.constant;
        const double b = reference.evaluate(x) - reference.constant;
        diff += std::abs(a - b);
        mass += b;
      }
  if (mass <= 0.0) throw std::domain_error("l1_divergence: reference has no mass on the grid");
  return diff / mass;
}

}  // namespace plumedial
