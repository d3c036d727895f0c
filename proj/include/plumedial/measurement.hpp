#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "plumedial/detector.hpp"
#include "plumedial/parallel.hpp"
#include "plumedial/rng.hpp"

namespace plumedial {

constexpr double kPlanck = 6.62607015e-34;       // J s
constexpr double kSpeedOfLight = 2.99792458e8;   // m/s

// Photons per pulse from the pulse energy: E / (h c / lambda).
inline double photons_per_pulse(double pulse_energy_j, double wavelength_m) {
  if (pulse_energy_j < 0.0 || wavelength_m <= 0.0)
    throw std::invalid_argument("photons_per_pulse: bad inputs");
  return pulse_energy_j * wavelength_m / (kPlanck * kSpeedOfLight);
}

// Ambient photon rate H_0 in photons / (m^2 s) for one aperture. The power
// is what a detector of this area collects over the full hemisphere; an
// aperture sees the fraction solid_angle / 2 pi of it.
inline double ambient_rate(double power_w, double wavelength_m, double fov_solid_angle_sr,
                           double detector_area_m2) {
  if (power_w < 0.0 || fov_solid_angle_sr < 0.0 || detector_area_m2 <= 0.0)
    throw std::invalid_argument("ambient_rate: bad inputs");
  const double photon_rate = power_w * wavelength_m / (kPlanck * kSpeedOfLight);
  return photon_rate * (fov_solid_angle_sr / (2.0 * M_PI)) / detector_area_m2;
}

struct AcquisitionConfig {
  double pulse_photons = 0.0;     // H_D, photons per pulse before efficiency
  double efficiency = 1.0;        // applied once, here
  double detector_area = 7.0686e-4;
  int pulses_per_direction = 1;
  double wavelength_on_m = 1645.55e-9;
  double wavelength_off_m = 1646.0e-9;
  std::vector<double> ambient_rate_per_fov;  // H_0 per aperture, photons/(m^2 s)

  void validate() const {
    if (pulse_photons < 0.0 || efficiency < 0.0 || efficiency > 1.0 || detector_area <= 0.0 ||
        pulses_per_direction < 1)
      throw std::invalid_argument("AcquisitionConfig: invalid values");
    if (wavelength_on_m == wavelength_off_m)
      throw std::invalid_argument("AcquisitionConfig: on/off wavelengths must differ");
  }

  // Effective source strength multiplying the response kernel.
  double effective_pulse_photons() const {
    return pulse_photons * efficiency * pulses_per_direction;
  }

  double ambient_mean_per_bin(int fov, double dt_seconds) const {
    if (ambient_rate_per_fov.empty()) return 0.0;
    const double h0 = ambient_rate_per_fov.at(static_cast<std::size_t>(fov));
    return dt_seconds * detector_area * h0 * efficiency * pulses_per_direction;
  }
};

// Poisson photon counts for a scan: counts_on/off indexed [fov][dir][bin].
struct MeasurementSet {
  int n_fov = 0;
  int n_dir = 0;
  int n_bins = 0;
  std::vector<long> counts_on, counts_off;
  std::vector<double> dir_az, dir_pol;  // per direction, radians
  TimeBinning binning;
  AcquisitionConfig config;

  std::size_t size() const { return static_cast<std::size_t>(n_fov) * n_dir * n_bins; }
  std::size_t idx(int f, int d, int b) const {
    return (static_cast<std::size_t>(f) * n_dir + d) * n_bins + b;
  }
};

// Expected responses for a scan, same layout as MeasurementSet.
struct ScanResponse {
  int n_fov = 0;
  int n_dir = 0;
  int n_bins = 0;
  std::vector<double> on, off;             // kernel densities m
  std::vector<double> se_on, se_off;       // Monte Carlo standard errors (empty: exact)
  std::vector<double> grad_on, grad_off;   // optional, x14
  std::size_t idx(int f, int d, int b) const {
    return (static_cast<std::size_t>(f) * n_dir + d) * n_bins + b;
  }
};

// Independent Poisson draws around dt H_D A_D m psi + dt A_D H_0 per bin.
// nuisance may be empty (psi = 1) or hold one factor per (fov, dir, bin).
inline MeasurementSet synthesize(const ScanResponse& truth, const std::vector<double>& nuisance,
                                 const AcquisitionConfig& config, const TimeBinning& binning,
                                 CounterRng rng) {
  config.validate();
  if (!nuisance.empty() && nuisance.size() != truth.on.size())
    throw std::invalid_argument("synthesize: nuisance shape mismatch");

  MeasurementSet out;
  out.n_fov = truth.n_fov;
  out.n_dir = truth.n_dir;
  out.n_bins = truth.n_bins;
  out.binning = binning;
  out.config = config;
  out.counts_on.resize(truth.on.size());
  out.counts_off.resize(truth.on.size());

  const double source = config.effective_pulse_photons() * binning.dt * config.detector_area;
  const double dt_s = binning.dt_seconds();

  for (int f = 0; f < truth.n_fov; ++f) {
    const double ambient = config.ambient_mean_per_bin(f, dt_s);
    for (int d = 0; d < truth.n_dir; ++d) {
      CounterRng stream = rng.child(static_cast<std::uint64_t>(f) * truth.n_dir + d);
      for (int b = 0; b < truth.n_bins; ++b) {
        const std::size_t i = truth.idx(f, d, b);
        const double psi = nuisance.empty() ? 1.0 : nuisance[i];
        const double mean_on = source * truth.on[i] * psi + ambient;
        const double mean_off = source * truth.off[i] * psi + ambient;
        if (!std::isfinite(mean_on) || !std::isfinite(mean_off) || mean_on < 0.0 || mean_off < 0.0)
          throw std::domain_error("synthesize: non-finite or negative Poisson mean");
        out.counts_on[i] = sample_poisson(mean_on, stream);
        out.counts_off[i] = sample_poisson(mean_off, stream);
      }
    }
  }
  return out;
}

}  // namespace plumedial
