#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "plumedial/detector.hpp"
#include "plumedial/dispersion.hpp"
#include "plumedial/geometry.hpp"
#include "plumedial/optics.hpp"
#include "plumedial/parallel.hpp"
#include "plumedial/rng.hpp"

namespace plumedial {

// One recorded next-event contribution: the path vertices up to the
// scattering event plus the deterministic connection back to the detector.
struct PathSample {
  std::vector<Vec3> vertices;   // scattering vertices x_1..x_k
  std::vector<Vec3> directions; // propagation direction entering each vertex
  double arrival_time = 0.0;    // total polyline length (c = 1)
  int order = 0;                // number of scattering events k
  double weight = 0.0;          // off-wavelength contribution, per area per time
};

struct TraceConfig {
  long n_paths = 100000;
  int k_max = 8;
  int batch_size = 1024;
  double roulette_threshold = 1e-6;
  bool with_gradient = false;
  bool per_order = false;
  int n_threads = 0;  // 0: resolve from environment / hardware
  const KernelField* probe = nullptr;  // optional absorption shape for path moments
  std::function<void(const PathSample&)> observer;  // test/debug hook, serialises tracing
};

// Tallies for one scan direction, both wavelengths, all apertures. Values
// are measurement-kernel densities: multiplying by dt * H_D * A_D gives the
// expected count per bin.
struct DirectionalResponse {
  int n_fov = 0;
  int n_bins = 0;
  int k_max = 0;
  long n_paths = 0;
  std::vector<double> on, off;           // [fov][bin]
  std::vector<double> se_on, se_off;     // [fov][bin]
  std::vector<double> grad_on, grad_off; // [fov][bin][theta]
  std::vector<double> order_on, order_off;  // [order][fov][bin]
  std::vector<double> probe_weighted;    // sum of off-contribution * path integral of probe
  std::size_t idx(int f, int b) const { return static_cast<std::size_t>(f) * n_bins + b; }
  std::size_t gidx(int f, int b) const { return idx(f, b) * ThetaLayout::kDim; }

  // Detection-weighted mean of the probe line integral, NaN where nothing
  // was detected.
  double probe_moment(int f, int b) const {
    const double w = off[idx(f, b)];
    return w > 0.0 ? probe_weighted[idx(f, b)] / w : std::nan("");
  }
};

namespace detail {

// Optical-depth bookkeeping along a segment: the plume line integral is
// computed once and reused for the scattering and absorption coefficients.
struct SegmentIntegrals {
  double length = 0.0;
  double plume = 0.0;           // integral of u
  ThetaVector plume_grad{};     // d/d theta of the plume integral
  double probe = 0.0;           // integral of the probe field
};

inline SegmentIntegrals segment_integrals(const OpticalScene& scene, const TraceConfig& cfg,
                                          const Vec3& origin, const Vec3& dir, double length,
                                          bool with_gradient) {
  SegmentIntegrals out;
  out.length = length;
  if (with_gradient) {
    out.plume = line_integral_with_gradient(scene.plume, origin, dir, 0.0, length, out.plume_grad);
  } else {
    out.plume = line_integral(scene.plume.field, origin, dir, 0.0, length);
  }
  if (cfg.probe) out.probe = line_integral(*cfg.probe, origin, dir, 0.0, length);
  return out;
}

inline double scatter_depth(const OpticalScene& scene, const SegmentIntegrals& s) {
  return scene.sigma_s_ambient * s.length + scene.scatter_scale * s.plume;
}

inline double alpha_depth(const OpticalScene& scene, const SegmentIntegrals& s) {
  return scene.c_ambient * s.length + scene.c_dial * s.plume;
}

// Inverts the scattering optical depth along a ray: smallest s with
// tau_s(s) = target, or failure if the depth to s_max falls short.
// Newton iteration with a bisection bracket; tau_s is nondecreasing.
inline bool invert_scatter_depth(const OpticalScene& scene, const Vec3& origin, const Vec3& dir,
                                 double s_max, double target, double* s_hit) {
  const auto tau = [&](double s) {
    return scene.sigma_s_ambient * s +
           scene.scatter_scale * line_integral(scene.plume.field, origin, dir, 0.0, s);
  };
  const double tau_max = tau(s_max);
  if (target >= tau_max) return false;
  if (scene.plume.field.kernels.empty() || scene.scatter_scale == 0.0) {
    *s_hit = target / scene.sigma_s_ambient;  // homogeneous medium, analytic
    return true;
  }
  // The root must track parameter perturbations smoothly (finite differences
  // over common random numbers divide by tiny steps), so iterate essentially
  // to machine precision.
  double lo = 0.0, hi = s_max;
  double s = s_max * (tau_max > 0.0 ? target / tau_max : 0.5);
  for (int it = 0; it < 200; ++it) {
    const double f = tau(s) - target;
    if (f > 0.0)
      hi = s;
    else
      lo = s;
    const double density = scene.sigma_s(origin + dir * s);
    double step = density > 1e-300 ? f / density : 0.0;
    double s_next = s - step;
    if (!(s_next > lo && s_next < hi)) s_next = 0.5 * (lo + hi);
    if (std::abs(s_next - s) < 1e-13 * (1.0 + s)) {
      s = s_next;
      break;
    }
    s = s_next;
  }
  *s_hit = s;
  return true;
}

struct Accumulator {
  std::vector<double> on, off, grad_on, grad_off, order_on, order_off, probe_weighted;
  // batch-mean statistics for the standard errors
  std::vector<double> batch_sum_on, batch_sum_off, batch_sq_on, batch_sq_off;
  long n_batches = 0;

  void init(int n_fov, int n_bins, int k_max, bool with_gradient, bool per_order, bool probe) {
    const std::size_t nb = static_cast<std::size_t>(n_fov) * n_bins;
    on.assign(nb, 0.0);
    off.assign(nb, 0.0);
    batch_sum_on.assign(nb, 0.0);
    batch_sum_off.assign(nb, 0.0);
    batch_sq_on.assign(nb, 0.0);
    batch_sq_off.assign(nb, 0.0);
    if (with_gradient) {
      grad_on.assign(nb * ThetaLayout::kDim, 0.0);
      grad_off.assign(nb * ThetaLayout::kDim, 0.0);
    }
    if (per_order) {
      order_on.assign(nb * k_max, 0.0);
      order_off.assign(nb * k_max, 0.0);
    }
    if (probe) probe_weighted.assign(nb, 0.0);
  }

  void merge(const Accumulator& o) {
    const auto add = [](std::vector<double>& a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(on, o.on);
    add(off, o.off);
    add(batch_sum_on, o.batch_sum_on);
    add(batch_sum_off, o.batch_sum_off);
    add(batch_sq_on, o.batch_sq_on);
    add(batch_sq_off, o.batch_sq_off);
    add(grad_on, o.grad_on);
    add(grad_off, o.grad_off);
    add(order_on, o.order_on);
    add(order_off, o.order_off);
    add(probe_weighted, o.probe_weighted);
    n_batches += o.n_batches;
  }
};

}  // namespace detail

// Forward path tracing with next-event estimation at every vertex.
//
// Paths start at the detector/source position in scan direction v. Collision
// distances are drawn against the scattering coefficient only, so absorption
// never terminates a path: it enters through throughput weights, which keeps
// the on- and off-wavelength estimates exactly correlated (every path gives
// both, the on value being the off value times exp(-int alpha)). At every
// vertex the path is connected deterministically to the detector; the
// contribution carries the phase density toward the connection direction,
// the two-way transmittances, the 1/r^2 solid-angle factor and the aperture
// acceptance per configured FOV. The ground plane z = 0 absorbs.
//
// Gradients combine the pathwise derivative of the transmittance exponents
// with the score of the sampled scattering density, accumulated in the same
// pass over shared random numbers.
inline DirectionalResponse trace_response(const OpticalScene& scene, const Detector& detector,
                                          const Vec3& direction, const TimeBinning& binning,
                                          const TraceConfig& cfg, CounterRng rng) {
  if (cfg.n_paths < 1) throw std::invalid_argument("trace_response: n_paths must be >= 1");
  if (cfg.k_max < 1) throw std::invalid_argument("trace_response: k_max must be >= 1");
  if (detector.fov_apertures.empty())
    throw std::invalid_argument("trace_response: detector needs at least one FOV");
  if (detector.position.z <= 0.0)
    throw std::invalid_argument("trace_response: detector must sit above the ground plane");

  const int n_fov = static_cast<int>(detector.fov_apertures.size());
  const int n_bins = binning.n_bins;
  const double t_end = binning.t_end();
  const bool with_grad = cfg.with_gradient;
  const bool use_probe = cfg.probe != nullptr;

  const long n_batches = (cfg.n_paths + cfg.batch_size - 1) / cfg.batch_size;
  const long actual_paths = n_batches * cfg.batch_size;

  // Fixed task decomposition, independent of the worker count, so the
  // reduction order and therefore every bit of the result is reproducible.
  const int n_tasks = static_cast<int>(std::min<long>(n_batches, 64));
  std::vector<detail::Accumulator> slots(n_tasks);

  auto run_batch = [&](detail::Accumulator& acc, CounterRng batch_stream) {
    std::vector<double> local_on(acc.on.size(), 0.0);
    std::vector<double> local_off(acc.off.size(), 0.0);

    for (int p = 0; p < cfg.batch_size; ++p) {
      // Each path owns a child stream: under common random numbers a
      // perturbed scene replays the same draws path by path, so one path's
      // changed branch structure cannot dephase its neighbours.
      CounterRng batch_rng = batch_stream.child(p);
      Vec3 x = detector.position;
      Vec3 dir = direction;
      double t_path = 0.0;        // polyline length so far
      double alpha_path = 0.0;    // int alpha along the polyline
      double probe_path = 0.0;    // int probe along the polyline
      double rr_weight = 1.0;
      ThetaVector score{};        // d log p(path) + pathwise terms common to both wavelengths
      ThetaVector alpha_grad_path{};  // d/d theta of int alpha along the polyline
      PathSample sample;
      const bool record = static_cast<bool>(cfg.observer);

      for (int k = 1; k <= cfg.k_max; ++k) {
        // Bound the free flight by the ground plane and by the last useful
        // arrival time; optical depth beyond either cannot contribute.
        const double s_ground = dir.z < 0.0 ? x.z / (-dir.z) : 1e300;
        const double s_useful = t_end - t_path;
        if (s_useful <= 0.0) break;
        const double s_max = std::min(s_ground, s_useful);

        const double xi = batch_rng.exponential();
        double s_hit = 0.0;
        if (!detail::invert_scatter_depth(scene, x, dir, s_max, xi, &s_hit)) break;

        const auto seg = detail::segment_integrals(scene, cfg, x, dir, s_hit, with_grad);
        const Vec3 vertex = x + dir * s_hit;
        t_path += s_hit;
        alpha_path += detail::alpha_depth(scene, seg);
        probe_path += seg.probe;

        if (with_grad) {
          // Score of the sampled collision: d sigma_s(vertex)/sigma_s(vertex)
          // minus the segment's scattering-depth derivative.
          const ThetaVector du = field_value_gradient(scene.plume, vertex);
          const double u_here = scene.plume.field.evaluate(vertex);
          const double sig_here = scene.sigma_s_ambient + scene.scatter_scale * u_here;
          for (int c = 0; c < ThetaLayout::kDim; ++c) {
            double d_sig_point = scene.scatter_scale * du[c];
            double d_sig_seg = scene.scatter_scale * seg.plume_grad[c];
            double d_alpha_seg = scene.c_dial * seg.plume_grad[c];
            if (c == ThetaLayout::kScatter) {
              d_sig_point += u_here;
              d_sig_seg += seg.plume;
            }
            score[c] += d_sig_point / sig_here - d_sig_seg;
            alpha_grad_path[c] += d_alpha_seg;
          }
        }

        // Next-event connection to the detector.
        const Vec3 to_det = detector.position - vertex;
        const double r = norm(to_det);
        const double arrival = t_path + r;
        if (arrival > t_end) break;  // neither this vertex nor any later one can arrive in time

        if (r > 1e-9) {
          const Vec3 u_conn = to_det / r;
          const int bin = binning.bin_of(arrival);
          if (bin >= 0) {
            // The instrument is re-oriented per scan direction: the
            // acceptance cone is centred on the retro direction -v.
            const double cos_retro = dot(u_conn, -direction);
            bool any_accept = false;
            for (int f = 0; f < n_fov; ++f)
              any_accept |= detector.fov_apertures[f].accepts(cos_retro);
            if (any_accept) {
              const auto conn = detail::segment_integrals(scene, cfg, vertex, u_conn, r, with_grad);
              const double tau_s_conn = detail::scatter_depth(scene, conn);
              const double phase_density = scene.phase.pdf(dot(dir, u_conn));
              const double f_off = rr_weight * phase_density *
                                   std::exp(-scene.sigma_a_ambient * (t_path + r) - tau_s_conn) /
                                   (r * r);
              const double alpha_total = alpha_path + detail::alpha_depth(scene, conn);
              const double f_on = f_off * std::exp(-alpha_total);
              const double probe_total = probe_path + conn.probe;

              for (int f = 0; f < n_fov; ++f) {
                if (!detector.fov_apertures[f].accepts(cos_retro)) continue;
                const std::size_t i = static_cast<std::size_t>(f) * n_bins + bin;
                local_off[i] += f_off;
                local_on[i] += f_on;
                if (cfg.per_order) {
                  const std::size_t oi = (static_cast<std::size_t>(k - 1) * n_fov + f) * n_bins + bin;
                  acc.order_off[oi] += f_off;
                  acc.order_on[oi] += f_on;
                }
                if (use_probe) acc.probe_weighted[i] += f_off * probe_total;
                if (with_grad) {
                  const std::size_t gi = i * ThetaLayout::kDim;
                  for (int c = 0; c < ThetaLayout::kDim; ++c) {
                    double g_off = score[c] - scene.scatter_scale * conn.plume_grad[c];
                    if (c == ThetaLayout::kScatter) g_off -= conn.plume;
                    const double g_on =
                        g_off - (alpha_grad_path[c] + scene.c_dial * conn.plume_grad[c]);
                    acc.grad_off[gi + c] += f_off * g_off;
                    acc.grad_on[gi + c] += f_on * g_on;
                  }
                }
              }
              if (record) {
                sample.vertices.push_back(vertex);
                sample.directions.push_back(dir);
                sample.arrival_time = arrival;
                sample.order = k;
                sample.weight = f_off;
                cfg.observer(sample);
                sample.vertices.pop_back();
                sample.directions.pop_back();
              }
            }
          }
        }

        if (record) {
          sample.vertices.push_back(vertex);
          sample.directions.push_back(dir);
        }

        // Unbiased Russian roulette once the throughput gets negligible.
        const double throughput = rr_weight * std::exp(-scene.sigma_a_ambient * t_path);
        if (throughput < cfg.roulette_threshold) {
          if (batch_rng.uniform() < 0.5) break;
          rr_weight *= 2.0;
        }

        x = vertex;
        dir = scene.phase.sample(dir, batch_rng);
      }
    }

    for (std::size_t i = 0; i < local_on.size(); ++i) {
      acc.on[i] += local_on[i];
      acc.off[i] += local_off[i];
      const double mean_on = local_on[i] / cfg.batch_size;
      const double mean_off = local_off[i] / cfg.batch_size;
      acc.batch_sum_on[i] += mean_on;
      acc.batch_sum_off[i] += mean_off;
      acc.batch_sq_on[i] += mean_on * mean_on;
      acc.batch_sq_off[i] += mean_off * mean_off;
    }
    acc.n_batches += 1;
  };

  auto run_task = [&](int task) {
    detail::Accumulator& acc = slots[task];
    acc.init(n_fov, n_bins, cfg.k_max, with_grad, cfg.per_order, use_probe);
    for (long b = task; b < n_batches; b += n_tasks) run_batch(acc, rng.child(b));
  };

  if (cfg.observer) {
    for (int t = 0; t < n_tasks; ++t) run_task(t);  // observer hook: run serially
  } else {
    parallel_for(n_tasks, cfg.n_threads, run_task);
  }

  detail::Accumulator total;
  total.init(n_fov, n_bins, cfg.k_max, with_grad, cfg.per_order, use_probe);
  for (const auto& s : slots) total.merge(s);

  DirectionalResponse out;
  out.n_fov = n_fov;
  out.n_bins = n_bins;
  out.k_max = cfg.k_max;
  out.n_paths = actual_paths;
  const double norm_c = 1.0 / (static_cast<double>(actual_paths) * binning.dt);
  const std::size_t nb = total.on.size();
  out.on.resize(nb);
  out.off.resize(nb);
  out.se_on.resize(nb);
  out.se_off.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    out.on[i] = total.on[i] * norm_c;
    out.off[i] = total.off[i] * norm_c;
    const double B = static_cast<double>(total.n_batches);
    // Standard error of the mean of the per-batch means, in density units.
    const auto se = [&](double sum, double sq) {
      if (B < 2.0) return 0.0;
      const double mean = sum / B;
      const double var_of_mean = std::max(sq / B - mean * mean, 0.0) / (B - 1.0);
      return std::sqrt(var_of_mean) / binning.dt;
    };
    out.se_on[i] = se(total.batch_sum_on[i], total.batch_sq_on[i]);
    out.se_off[i] = se(total.batch_sum_off[i], total.batch_sq_off[i]);
  }
  if (with_grad) {
    out.grad_on.resize(nb * ThetaLayout::kDim);
    out.grad_off.resize(nb * ThetaLayout::kDim);
    for (std::size_t i = 0; i < nb * ThetaLayout::kDim; ++i) {
      out.grad_on[i] = total.grad_on[i] * norm_c;
      out.grad_off[i] = total.grad_off[i] * norm_c;
    }
  }
  if (cfg.per_order) {
    out.order_on.resize(nb * cfg.k_max);
    out.order_off.resize(nb * cfg.k_max);
    for (std::size_t i = 0; i < nb * cfg.k_max; ++i) {
      out.order_on[i] = total.order_on[i] * norm_c;
      out.order_off[i] = total.order_off[i] * norm_c;
    }
  }
  if (use_probe) {
    out.probe_weighted.resize(nb);
    for (std::size_t i = 0; i < nb; ++i) out.probe_weighted[i] = total.probe_weighted[i] * norm_c;
  }
  return out;
}

// Spec surface: tallies for a single wavelength.
inline std::vector<double> trace_paths(const OpticalScene& scene, const Detector& detector,
                                       const Vec3& direction, Wavelength wavelength,
                                       const TimeBinning& binning, long n_paths, int k_max,
                                       CounterRng rng) {
  TraceConfig cfg;
  cfg.n_paths = n_paths;
  cfg.k_max = k_max;
  const DirectionalResponse r = trace_response(scene, detector, direction, binning, cfg, rng);
  return wavelength == Wavelength::kOn ? r.on : r.off;
}

inline DirectionalResponse response_with_gradient(const OpticalScene& scene,
                                                  const Detector& detector, const Vec3& direction,
                                                  const TimeBinning& binning, TraceConfig cfg,
                                                  CounterRng rng) {
  cfg.with_gradient = true;
  return trace_response(scene, detector, direction, binning, cfg, rng);
}

// Analytic single-scatter response for the monostatic geometry:
//   m1(v, t) = (2 / t^2) exp(-2 tau_{a+s}(t/2)) sigma_s(x_D + (t/2) v) f_p(-1)
// evaluated at bin midpoints. The factor 2 converts the per-range density to
// a per-arrival-time density, so dt * H_D * A_D * m1 is the expected count.
struct SingleScatterResponse {
  std::vector<double> on, off;            // [bin]
  std::vector<double> grad_on, grad_off;  // [bin][theta]
};

inline SingleScatterResponse single_scatter_response(const OpticalScene& scene,
                                                     const Detector& detector,
                                                     const Vec3& direction,
                                                     const TimeBinning& binning,
                                                     bool with_gradient = false) {
  SingleScatterResponse out;
  out.on.assign(binning.n_bins, 0.0);
  out.off.assign(binning.n_bins, 0.0);
  if (with_gradient) {
    out.grad_on.assign(static_cast<std::size_t>(binning.n_bins) * ThetaLayout::kDim, 0.0);
    out.grad_off.assign(static_cast<std::size_t>(binning.n_bins) * ThetaLayout::kDim, 0.0);
  }
  const double backscatter = scene.phase.pdf(-1.0);
  for (int j = 0; j < binning.n_bins; ++j) {
    const double t = binning.mid(j);
    if (t <= 0.0) continue;
    const double range = 0.5 * t;
    const Vec3 turn = detector.position + direction * range;
    if (turn.z <= 0.0) continue;  // below the absorbing ground

    ThetaVector plume_grad{};
    double plume_int;
    if (with_gradient) {
      plume_int = line_integral_with_gradient(scene.plume, detector.position, direction, 0.0,
                                              range, plume_grad);
    } else {
      plume_int = line_integral(scene.plume.field, detector.position, direction, 0.0, range);
    }
    const double u_turn = scene.plume.field.evaluate(turn);
    const double sigma_s_turn = scene.sigma_s_ambient + scene.scatter_scale * u_turn;
    const double tau_off =
        (scene.sigma_a_ambient + scene.sigma_s_ambient) * range + scene.scatter_scale * plume_int;
    const double alpha_int = scene.c_ambient * range + scene.c_dial * plume_int;

    const double m_off = 2.0 / (t * t) * std::exp(-2.0 * tau_off) * sigma_s_turn * backscatter;
    const double m_on = m_off * std::exp(-2.0 * alpha_int);
    out.off[j] = m_off;
    out.on[j] = m_on;

    if (with_gradient && sigma_s_turn > 0.0) {
      const ThetaVector du = field_value_gradient(scene.plume, turn);
      const std::size_t gi = static_cast<std::size_t>(j) * ThetaLayout::kDim;
      for (int c = 0; c < ThetaLayout::kDim; ++c) {
        double d_sig_turn = scene.scatter_scale * du[c];
        double d_tau = scene.scatter_scale * plume_grad[c];
        if (c == ThetaLayout::kScatter) {
          d_sig_turn += u_turn;
          d_tau += plume_int;
        }
        const double dlog_off = d_sig_turn / sigma_s_turn - 2.0 * d_tau;
        const double dlog_on = dlog_off - 2.0 * scene.c_dial * plume_grad[c];
        out.grad_off[gi + c] = m_off * dlog_off;
        out.grad_on[gi + c] = m_on * dlog_on;
      }
    }
  }
  return out;
}

// Asymptotic work estimate for one RTE evaluation, in equivalent flops:
// proportional to paths * bins * k_max^2 * kernels with a calibrated
// constant. Used by the CLI to budget runs.
inline double cost_model(long n_paths, int n_bins, int k_max, int n_kernels) {
  constexpr double kCalibratedConstant = 0.55;
  return kCalibratedConstant * static_cast<double>(n_paths) * n_bins *
         static_cast<double>(k_max) * k_max * std::max(n_kernels, 1);
}

}  // namespace plumedial
