#pragma once

#include <cmath>
#include <vector>

#include "plumedial/detection.hpp"
#include "plumedial/io.hpp"
#include "plumedial/scenario.hpp"

namespace plumedial {

// Detection-power comparison on the single-kernel reference geometry: one
// radial absorber of the given radius straight ahead of the detector. For a
// nuisance point theta = (sigma0, sigma_s, g) the scene carries homogeneous
// ambient scattering of optical depth sigma0 to the kernel centre plus
// kernel-aligned scattering of through-centre thickness sigma_s.
struct PowerMapContext {
  Detector detector;
  Vec3 direction{1.0, 0.0, 0.0};
  TimeBinning binning;
  KernelField alpha_shape;  // alpha0, known shape
  AcquisitionConfig acquisition;

  static PowerMapContext make(const Scenario& scenario) {
    PowerMapContext ctx;
    ctx.detector = scenario.detector;
    // The wide channel is the multiple-scattering annulus: the comparison
    // asks what the photons beyond the narrow cone add, and their path
    // distribution is what the scattering nuisance moves.
    ctx.detector.fov_apertures = {
        FovAperture::cone(scenario.narrow_half_angle),
        FovAperture::annulus(scenario.narrow_half_angle, scenario.wide_half_angle)};
    const PowerGridSpec& spec = scenario.power_grid;
    ctx.direction = normalized(Vec3(1.0, 0.0, 0.02));
    const Vec3 center = ctx.detector.position + ctx.direction * spec.distance;

    KernelField shape;
    shape.kernels.push_back({center, spec.kernel_radius, spec.alpha_amplitude});
    ctx.alpha_shape = shape;

    // Bins spanning the kernel's two-way arrival times.
    const double lo = 2.0 * (spec.distance - 2.5 * spec.kernel_radius);
    const double hi = 2.0 * (spec.distance + 2.5 * spec.kernel_radius);
    const int n_bins = 25;
    ctx.binning = TimeBinning{n_bins, lo, (hi - lo) / n_bins};

    ctx.acquisition = scenario.acquisition(FovMode::kNarrow);
    ctx.acquisition.ambient_rate_per_fov = {0.0, 0.0};
    return ctx;
  }

  OpticalScene scene_for(double sigma0, double sigma_s, double g, double distance,
                         double kernel_radius) const {
    OpticalScene s;
    s.sigma_a_ambient = 0.0;
    s.sigma_s_ambient = sigma0 / distance;
    s.c_dial = 0.0;
    s.scatter_scale = 0.0;
    s.phase = g > 0.0 ? PhaseFunction::henyey_greenstein(g) : PhaseFunction::isotropic();
    // Kernel-aligned scattering: through-centre line integral equals sigma_s.
    const double amplitude = sigma_s / (kernel_radius * std::sqrt(2.0 * M_PI));
    s.plume.field.kernels.push_back(
        {detector.position + direction * distance, kernel_radius, amplitude});
    s.plume.field.constant = 0.0;
    // Fold the plume scattering into the homogeneous tracer fields.
    s.sigma_s_ambient = sigma0 / distance;
    s.scatter_scale = 1.0;  // sigma_s(x) = ambient + 1 * field(x)
    return s;
  }
};

struct PowerPoint {
  double sigma0 = 0.0, sigma_s = 0.0, g = 0.0;
  std::vector<double> q_bar;  // wide-FOV absorption moments per bin (masked: <0 undefined)
  std::vector<double> weight_L;  // wide-FOV signal weights per bin
};

// Tabulates wide-FOV moments and weights for every nuisance grid point with
// one frozen path ensemble, so the maps vary smoothly across the grid.
inline std::vector<PowerPoint> tabulate_power_grid(const PowerMapContext& ctx,
                                                   const PowerGridSpec& spec,
                                                   std::uint64_t seed) {
  std::vector<PowerPoint> points;
  const double source_scale = ctx.acquisition.effective_pulse_photons() * ctx.binning.dt *
                              ctx.acquisition.detector_area;
  std::vector<std::array<double, 3>> grid;
  for (double s0 : spec.sigma0)
    for (double ss : spec.sigma_s)
      for (double g : spec.g) grid.push_back({s0, ss, g});

  points.resize(grid.size());
  parallel_for(static_cast<int>(grid.size()), 0, [&](int idx) {
    const auto [s0, ss, g] = grid[idx];
    const OpticalScene scene = ctx.scene_for(s0, ss, g, spec.distance, spec.kernel_radius);
    TraceConfig cfg;
    cfg.n_paths = spec.n_paths;
    cfg.k_max = spec.k_max;
    cfg.n_threads = 1;
    cfg.probe = &ctx.alpha_shape;
    const DirectionalResponse r =
        trace_response(scene, ctx.detector, ctx.direction, ctx.binning, cfg,
                       CounterRng(CounterRng::mix(seed ^ 0xfeedULL)));
    PowerPoint p;
    p.sigma0 = s0;
    p.sigma_s = ss;
    p.g = g;
    p.q_bar.assign(ctx.binning.n_bins, -1.0);
    p.weight_L.assign(ctx.binning.n_bins, 0.0);
    for (int b = 0; b < ctx.binning.n_bins; ++b) {
      const std::size_t wide = static_cast<std::size_t>(1) * ctx.binning.n_bins + b;
      if (r.off[wide] > 0.0) {
        p.q_bar[b] = r.probe_weighted[wide] / r.off[wide];
        p.weight_L[b] = 0.5 * source_scale * r.off[wide];
      }
    }
    points[idx] = std::move(p);
  });
  return points;
}

struct PhiMaps {
  std::vector<PhiMapRow> rows;  // phi over (sigma0, sigma_s) at g = g_truth
};

// Phi = Pi_hat / Pi0 - 1 for every truth point of the (sigma0, sigma_s)
// cross-section at g_truth. Candidates q_hat range over the tabulated grid,
// optionally restricted to sigma0 <= bound.
inline PhiMaps phi_map(const PowerMapContext& ctx, const PowerGridSpec& spec,
                       const std::vector<PowerPoint>& table, double sigma0_bound) {
  PhiMaps out;

  // Narrow-FOV reference: deterministic single-scatter weights and moments.
  const std::vector<double> q0 =
      narrow_q_moments(ctx.alpha_shape, ctx.detector, ctx.direction, ctx.binning);
  const double source_scale = ctx.acquisition.effective_pulse_photons() * ctx.binning.dt *
                              ctx.acquisition.detector_area;

  for (const PowerPoint& truth : table) {
    if (truth.g != spec.g_truth) continue;

    // Mask: bins where the wide moment is defined.
    std::vector<double> q_bar, L;
    std::vector<int> bins;
    for (int b = 0; b < ctx.binning.n_bins; ++b) {
      if (truth.q_bar[b] >= 0.0) {
        q_bar.push_back(truth.q_bar[b]);
        L.push_back(truth.weight_L[b]);
        bins.push_back(b);
      }
    }
    if (q_bar.empty()) continue;

    std::vector<std::vector<double>> candidates;
    for (const PowerPoint& cand : table) {
      if (sigma0_bound >= 0.0 && cand.sigma0 > sigma0_bound) continue;
      std::vector<double> q(bins.size());
      bool ok = true;
      for (std::size_t i = 0; i < bins.size(); ++i) {
        if (cand.q_bar[bins[i]] < 0.0) ok = false;
        q[i] = std::max(cand.q_bar[bins[i]], 0.0);
      }
      if (ok) candidates.push_back(std::move(q));
    }
    if (candidates.empty()) continue;
    const WorstCasePower w = worst_case_power(q_bar, candidates, L);

    // Pi0 from the analytic narrow-FOV single scatter of the truth scene.
    const OpticalScene scene =
        ctx.scene_for(truth.sigma0, truth.sigma_s, truth.g, spec.distance, spec.kernel_radius);
    const auto ss = single_scatter_response(scene, ctx.detector, ctx.direction, ctx.binning);
    double pi0_sq = 0.0;
    for (int b = 0; b < ctx.binning.n_bins; ++b)
      pi0_sq += q0[b] * q0[b] * 0.5 * source_scale * ss.off[b];
    const double pi0 = std::sqrt(pi0_sq);
    if (pi0 <= 0.0) continue;

    out.rows.push_back({truth.sigma0, truth.sigma_s, truth.g, w.pi_hat / pi0 - 1.0});
  }
  return out;
}

}  // namespace plumedial
