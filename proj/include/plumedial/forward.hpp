#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "plumedial/detector.hpp"
#include "plumedial/dispersion.hpp"
#include "plumedial/measurement.hpp"
#include "plumedial/optics.hpp"
#include "plumedial/parallel.hpp"
#include "plumedial/tracer.hpp"

namespace plumedial {

// Raster of scan directions around a central axis: azimuth sweeps in the
// horizontal plane, polar tilts against it.
struct ScanGrid {
  Vec3 center_axis{1.0, 0.0, 0.0};
  int n_az = 30;
  int n_pol = 10;
  double az_span = 0.5;   // rad, full width
  double pol_span = 0.2;  // rad, full width

  int n_dir() const { return n_az * n_pol; }

  double azimuth(int d) const {
    const int ia = d % n_az;
    return n_az > 1 ? (-0.5 + static_cast<double>(ia) / (n_az - 1)) * az_span : 0.0;
  }

  double polar(int d) const {
    const int ip = d / n_az;
    return n_pol > 1 ? (-0.5 + static_cast<double>(ip) / (n_pol - 1)) * pol_span : 0.0;
  }

  Vec3 direction(int d) const {
    const double az = azimuth(d);
    const double pol = polar(d);
    const double base_az = std::atan2(center_axis.y, center_axis.x);
    const double base_pol = std::asin(center_axis.z / norm(center_axis));
    const double a = base_az + az;
    const double p = base_pol + pol;
    return {std::cos(p) * std::cos(a), std::cos(p) * std::sin(a), std::sin(p)};
  }
};

enum class SolverKind { kAnalyticSingleScatter, kMonteCarlo };

// Forward model over a whole scan: evaluates the response (and optionally
// its parameter gradient) for every aperture, direction and bin. Narrow
// cones may use the analytic single-scatter path, everything else the
// tracer; tallies stay reproducible because the per-direction streams are
// derived from the run seed alone.
struct ScanForwardModel {
  Detector detector;
  ScanGrid grid;
  TimeBinning binning;
  TraceConfig solver;                  // n_paths, k_max, threads
  std::vector<SolverKind> fov_solver;  // one entry per aperture
  double sigma_a_ambient = 0.0;
  double sigma_s_ambient = 0.0;
  double c_dial = 1.0;
  double c_ambient = 0.0;
  PhaseFunction phase;
  // Additive response floor for Monte Carlo apertures. Bins the sampled
  // transport cannot resolve would otherwise drop out of the likelihood and
  // make losses incomparable across parameters; the floor pins them at an
  // uninformative P = 1/2 instead. Scaled so the floor sits well below one
  // expected count.
  double response_floor = 0.0;

  OpticalScene scene_for(const DispersionParams& params) const {
    return OpticalScene::from_dispersion(params, sigma_a_ambient, sigma_s_ambient, c_dial,
                                         c_ambient, phase);
  }

  ScanResponse evaluate(const DispersionParams& params, bool with_gradient,
                        std::uint64_t seed) const {
    const OpticalScene scene = scene_for(params);
    const int n_fov = static_cast<int>(detector.fov_apertures.size());
    const int n_dir = grid.n_dir();

    ScanResponse out;
    out.n_fov = n_fov;
    out.n_dir = n_dir;
    out.n_bins = binning.n_bins;
    const std::size_t total = static_cast<std::size_t>(n_fov) * n_dir * binning.n_bins;
    out.on.assign(total, 0.0);
    out.off.assign(total, 0.0);
    out.se_on.assign(total, 0.0);
    out.se_off.assign(total, 0.0);
    if (with_gradient) {
      out.grad_on.assign(total * ThetaLayout::kDim, 0.0);
      out.grad_off.assign(total * ThetaLayout::kDim, 0.0);
    }

    bool any_mc = false;
    for (SolverKind k : fov_solver) any_mc |= (k == SolverKind::kMonteCarlo);

    const CounterRng master(CounterRng::mix(seed ^ 0x9d5c1c5a7bd9ull));
    parallel_for(n_dir, solver.n_threads, [&](int d) {
      const Vec3 v = grid.direction(d);
      DirectionalResponse mc;
      if (any_mc) {
        TraceConfig cfg = solver;
        cfg.with_gradient = with_gradient;
        cfg.n_threads = 1;  // outer loop owns the parallelism
        mc = trace_response(scene, detector, v, binning, cfg, master.child(d));
      }
      SingleScatterResponse ss;
      bool have_ss = false;
      for (int f = 0; f < n_fov; ++f) {
        const bool analytic = fov_solver.at(f) == SolverKind::kAnalyticSingleScatter;
        if (analytic && !have_ss) {
          ss = single_scatter_response(scene, detector, v, binning, with_gradient);
          have_ss = true;
        }
        for (int b = 0; b < binning.n_bins; ++b) {
          const std::size_t i = out.idx(f, d, b);
          if (analytic) {
            out.on[i] = ss.on[b];
            out.off[i] = ss.off[b];
            if (with_gradient)
              for (int c = 0; c < ThetaLayout::kDim; ++c) {
                out.grad_on[i * ThetaLayout::kDim + c] = ss.grad_on[b * ThetaLayout::kDim + c];
                out.grad_off[i * ThetaLayout::kDim + c] = ss.grad_off[b * ThetaLayout::kDim + c];
              }
          } else {
            const std::size_t mi = mc.idx(f, b);
            out.on[i] = mc.on[mi] + response_floor;
            out.off[i] = mc.off[mi] + response_floor;
            out.se_on[i] = mc.se_on[mi];
            out.se_off[i] = mc.se_off[mi];
            if (with_gradient)
              for (int c = 0; c < ThetaLayout::kDim; ++c) {
                out.grad_on[i * ThetaLayout::kDim + c] = mc.grad_on[mi * ThetaLayout::kDim + c];
                out.grad_off[i * ThetaLayout::kDim + c] = mc.grad_off[mi * ThetaLayout::kDim + c];
              }
          }
        }
      }
    });
    return out;
  }
};

}  // namespace plumedial
