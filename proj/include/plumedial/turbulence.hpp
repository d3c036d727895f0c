#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "plumedial/dispersion.hpp"
#include "plumedial/field_grid.hpp"
#include "plumedial/rng.hpp"

namespace plumedial {

// Multi-level branching perturbation of the smooth plume. Level k draws M_k
// replicates whose centrelines carry AR(1) noise with marginal std
// sqrt(phi_V[k]) of the local width (kernel widths shrink by
// sqrt(1 - phi_V[k]) so the ensemble mean stays the smooth field), plus
// jumps_per_level[k] split points where every branch forks in two with
// Gaussian offsets of relative scale sqrt(phi_J[k]) and a further width
// reduction of sqrt(1 - phi_J[k]) per generation.
struct TurbulenceConfig {
  int levels = 5;
  std::array<int, 5> replicates{1, 1, 3, 2, 1};
  std::array<double, 5> centerline_fraction{0.0, 8.0 / 9.0, 2.0 / 3.0, 2.0 / 3.0, 4.0 / 9.0};
  std::array<int, 5> jumps_per_level{0, 0, 0, 2, 4};
  std::array<double, 5> jump_fraction{0.0, 0.0, 0.0, 0.55, 0.4};
  double ar_coeff = 0.9;

  void validate() const {
    if (levels < 1 || levels > 5) throw std::invalid_argument("turbulence: levels in [1, 5]");
    for (int k = 0; k < levels; ++k) {
      if (centerline_fraction[k] < 0.0 || centerline_fraction[k] >= 1.0)
        throw std::invalid_argument("turbulence: phi_V in [0, 1)");
      if (jump_fraction[k] < 0.0 || jump_fraction[k] >= 1.0)
        throw std::invalid_argument("turbulence: phi_J in [0, 1)");
      if (replicates[k] < 1) throw std::invalid_argument("turbulence: replicates >= 1");
    }
    if (std::abs(ar_coeff) >= 1.0) throw std::invalid_argument("turbulence: |ar_coeff| < 1");
  }

  int total_replicates() const {
    int n = 0;
    for (int k = 0; k < levels; ++k) n += replicates[k];
    return n;
  }
};

namespace detail {

// Stationary AR(1) sequence with unit marginal variance, one value per puff.
inline std::vector<Vec3> ar1_path(int n, double rho, CounterRng& rng) {
  std::vector<Vec3> path(n);
  const double innovation = std::sqrt(1.0 - rho * rho);
  Vec3 state(rng.normal(), rng.normal(), rng.normal());
  path[0] = state;
  for (int i = 1; i < n; ++i) {
    state = state * rho + Vec3(rng.normal(), rng.normal(), rng.normal()) * innovation;
    path[i] = state;
  }
  return path;
}

struct Branch {
  Vec3 offset_units;  // accumulated jump offset in units of the local adjusted width
  double weight;      // share of the replicate mass
};

}  // namespace detail

// One perturbed realisation of the plume, averaged over all levels and
// replicates. Offsets scale with the local plume width and the width
// reductions exactly compensate their variance, so every puff's ensemble
// mean is its smooth counterpart; splits redistribute weight without
// creating mass. Children inherit the parent's AR(1) state (the trajectory
// stays continuous through a split).
inline KernelField perturb(const DispersionParams& params, const TurbulenceConfig& cfg,
                           CounterRng rng) {
  cfg.validate();
  const KernelField smooth = discretize_release(params, params.n_puffs);
  const int n_puffs = static_cast<int>(smooth.kernels.size());
  const double inv_total = 1.0 / cfg.total_replicates();

  KernelField out;
  out.constant = smooth.constant;
  out.cutoff_sigmas = smooth.cutoff_sigmas;

  for (int level = 0; level < cfg.levels; ++level) {
    const double phi_v = cfg.centerline_fraction[level];
    const double phi_j = cfg.jump_fraction[level];
    const double keep_v = std::sqrt(1.0 - phi_v);
    const double keep_j = std::sqrt(1.0 - phi_j);

    for (int rep = 0; rep < cfg.replicates[level]; ++rep) {
      CounterRng stream = rng.child((static_cast<std::uint64_t>(level) << 8) | rep);
      const std::vector<Vec3> noise = detail::ar1_path(n_puffs, cfg.ar_coeff, stream);

      // Jump locations, uniform over the release-time grid.
      std::vector<int> jump_at(n_puffs, 0);
      for (int j = 0; j < cfg.jumps_per_level[level]; ++j)
        jump_at[stream.uniform_index(static_cast<std::uint64_t>(n_puffs))] += 1;

      std::vector<detail::Branch> branches{{Vec3(), 1.0}};
      int generation = 0;
      for (int i = 0; i < n_puffs; ++i) {
        const GaussianPuff& base = smooth.kernels[i];

        for (int g = 0; g < jump_at[i]; ++g) {
          // Offset scale in width units: sqrt(phi_J) of what remains of the
          // adjusted width after `generation` previous reductions.
          const double scale = std::sqrt(phi_j) * std::pow(keep_j, generation);
          std::vector<detail::Branch> next;
          next.reserve(branches.size() * 2);
          for (const detail::Branch& br : branches) {
            const double share = stream.uniform();
            for (int child = 0; child < 2; ++child) {
              detail::Branch nb = br;
              nb.offset_units +=
                  Vec3(stream.normal(), stream.normal(), stream.normal()) * scale;
              nb.weight = br.weight * (child == 0 ? share : 1.0 - share);
              next.push_back(nb);
            }
          }
          branches = std::move(next);
          ++generation;
        }

        const double adj_width = base.bandwidth * keep_v;
        const double width = std::max(adj_width * std::pow(keep_j, generation),
                                      params.width_floor);
        const Vec3 wiggle = noise[i] * (std::sqrt(phi_v) * base.bandwidth);
        const double mass_scale = std::pow(base.bandwidth / width, 3.0);
        for (const detail::Branch& br : branches) {
          GaussianPuff k = base;
          k.center = base.center + wiggle + br.offset_units * adj_width;
          k.bandwidth = width;
          k.weight = inv_total * br.weight * base.weight * mass_scale;
          out.kernels.push_back(k);
        }
      }
    }
  }
  return out;
}

}  // namespace plumedial
