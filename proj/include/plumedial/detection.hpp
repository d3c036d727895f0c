#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "plumedial/dispersion.hpp"
#include "plumedial/measurement.hpp"
#include "plumedial/small_matrix.hpp"
#include "plumedial/tracer.hpp"

namespace plumedial {

// Log count ratios y = log(n/m) and averages z = (n + m)/2; bins with a
// zero count on either wavelength are masked out.
struct LogRatioData {
  int n_fov = 0, n_dir = 0, n_bins = 0;
  std::vector<double> y, z;
  std::vector<std::uint8_t> mask;
  std::size_t idx(int f, int d, int b) const {
    return (static_cast<std::size_t>(f) * n_dir + d) * n_bins + b;
  }
};

inline LogRatioData log_ratio_transform(const MeasurementSet& data) {
  LogRatioData out;
  out.n_fov = data.n_fov;
  out.n_dir = data.n_dir;
  out.n_bins = data.n_bins;
  out.y.assign(data.size(), 0.0);
  out.z.assign(data.size(), 0.0);
  out.mask.assign(data.size(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const long m = data.counts_on[i];
    const long n = data.counts_off[i];
    if (m <= 0 || n <= 0) continue;
    out.mask[i] = 1;
    out.y[i] = std::log(static_cast<double>(n) / static_cast<double>(m));
    out.z[i] = 0.5 * static_cast<double>(n + m);
  }
  return out;
}

// Signal-strength weights L = dt H_D A_D m_off / 2 from a known response.
inline std::vector<double> signal_weights(const ScanResponse& response,
                                          const AcquisitionConfig& config,
                                          const TimeBinning& binning) {
  const double source = config.effective_pulse_photons() * binning.dt * config.detector_area;
  std::vector<double> out(response.off.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * source * response.off[i];
  return out;
}

// Detection-weighted mean of the path integral of a known absorption shape
// over the detected-path distribution of one (direction, bin): reuses the
// tracer's probe tallies. Narrow-FOV single scattering reduces to the
// two-way line integral.
struct PathAbsorptionMoments {
  std::vector<double> moment;          // [fov][bin], NaN where undefined
  std::vector<std::uint8_t> defined;   // zero detection weight -> 0
};

inline PathAbsorptionMoments path_absorption_moment(const OpticalScene& scene,
                                                    const KernelField& alpha_shape,
                                                    const Detector& detector,
                                                    const Vec3& direction,
                                                    const TimeBinning& binning, TraceConfig cfg,
                                                    CounterRng rng) {
  cfg.probe = &alpha_shape;
  const DirectionalResponse r = trace_response(scene, detector, direction, binning, cfg, rng);
  PathAbsorptionMoments out;
  const std::size_t n = r.off.size();
  out.moment.assign(n, std::nan(""));
  out.defined.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (r.off[i] > 0.0) {
      out.moment[i] = r.probe_weighted[i] / r.off[i];
      out.defined[i] = 1;
    }
  }
  return out;
}

// Narrow-FOV limit of the absorption moment: the detected path at arrival
// time t is the out-and-back line, so q0(t) = 2 int_0^{t/2} alpha0. Depends
// on geometry only, not on any scattering nuisance.
inline std::vector<double> narrow_q_moments(const KernelField& alpha_shape,
                                            const Detector& detector, const Vec3& direction,
                                            const TimeBinning& binning) {
  std::vector<double> q(binning.n_bins, 0.0);
  for (int j = 0; j < binning.n_bins; ++j) {
    const double t = binning.mid(j);
    if (t <= 0.0) continue;
    q[j] = 2.0 * line_integral(alpha_shape, detector.position, direction, 0.0, 0.5 * t);
  }
  return q;
}

struct UmpTestResult {
  double statistic = 0.0;
  double threshold = 0.0;
  double p_value = 1.0;
  bool reject = false;
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sided standard normal quantile by bisection on the cdf.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p in (0,1) required");
  double lo = -10.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Score test for the presence of gas: statistic = sum q L y / sqrt(sum q^2 L),
// standard normal under the null, rejecting one-sidedly.
inline UmpTestResult ump_test(const LogRatioData& data, const std::vector<double>& weights_L,
                              const std::vector<double>& q_hat, double significance) {
  if (weights_L.size() != data.y.size() || q_hat.size() != data.y.size())
    throw std::invalid_argument("ump_test: shape mismatch");
  double num = 0.0, den = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < data.y.size(); ++i) {
    if (!data.mask[i]) continue;
    any = true;
    num += q_hat[i] * weights_L[i] * data.y[i];
    den += q_hat[i] * q_hat[i] * weights_L[i];
  }
  if (!any || den <= 0.0) throw std::domain_error("ump_test: empty mask");
  UmpTestResult out;
  out.statistic = num / std::sqrt(den);
  out.threshold = normal_quantile(1.0 - significance);
  out.p_value = 1.0 - normal_cdf(out.statistic);
  out.reject = out.statistic >= out.threshold;
  return out;
}

// Scalar projection of q_bar onto q_hat under the L-weighted inner product.
inline double scaled_projection(const std::vector<double>& q_hat, const std::vector<double>& q_bar,
                                const std::vector<double>& weights_L) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < q_hat.size(); ++i) {
    num += q_hat[i] * q_bar[i] * weights_L[i];
    den += q_hat[i] * q_hat[i] * weights_L[i];
  }
  return den > 0.0 ? num / std::sqrt(den) : 0.0;
}

struct WorstCasePower {
  double pi_hat = 0.0;   // worst-case scaled projection over the candidate set
  double pi_norm = 0.0;  // self projection |q_bar|_L
  int argmin = -1;
};

// Worst-case alignment: Pi_hat = min over candidate q_hat of the scaled
// projection of the true q_bar. All-zero candidates are excluded.
inline WorstCasePower worst_case_power(const std::vector<double>& q_bar,
                                       const std::vector<std::vector<double>>& candidates,
                                       const std::vector<double>& weights_L) {
  if (candidates.empty()) throw std::invalid_argument("worst_case_power: empty candidate set");
  WorstCasePower out;
  out.pi_norm = scaled_projection(q_bar, q_bar, weights_L);
  bool any = false;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double norm2 = 0.0;
    for (double v : candidates[c]) norm2 += v * v;
    if (norm2 <= 0.0) continue;  // degenerate candidate
    const double proj = scaled_projection(candidates[c], q_bar, weights_L);
    if (!any || proj < out.pi_hat) {
      out.pi_hat = proj;
      out.argmin = static_cast<int>(c);
      any = true;
    }
  }
  if (!any) throw std::domain_error("worst_case_power: all candidates degenerate");
  return out;
}

// Fisher information for theta at psi fixed to one:
// J = sum_wavelengths H dt A (1 + H_0 / (H_D m))^{-1} dm dm^T / m.
inline Matrix fisher_information_fixed_psi(const ScanResponse& response,
                                           const AcquisitionConfig& config,
                                           const TimeBinning& binning) {
  if (response.grad_on.empty())
    throw std::invalid_argument("fisher_information_fixed_psi: gradients required");
  Matrix info(ThetaLayout::kDim, ThetaLayout::kDim);
  const double source = config.effective_pulse_photons() * binning.dt * config.detector_area;
  const double dt_s = binning.dt_seconds();
  std::vector<double> g(ThetaLayout::kDim);
  for (int f = 0; f < response.n_fov; ++f) {
    const double ambient = config.ambient_mean_per_bin(f, dt_s);
    for (int d = 0; d < response.n_dir; ++d) {
      for (int b = 0; b < response.n_bins; ++b) {
        const std::size_t i = response.idx(f, d, b);
        for (int wl = 0; wl < 2; ++wl) {
          const double m = wl == 0 ? response.on[i] : response.off[i];
          if (m <= 0.0) continue;  // zero-response bins carry no information
          const double signal = source * m;
          const double damping = signal / (signal + ambient);  // (1 + H0/(HD m))^{-1}
          const auto& grad = wl == 0 ? response.grad_on : response.grad_off;
          for (int c = 0; c < ThetaLayout::kDim; ++c) g[c] = grad[i * ThetaLayout::kDim + c];
          info.add_outer(g, damping * source / m);
        }
      }
    }
  }
  return info;
}

}  // namespace plumedial
