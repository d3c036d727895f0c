#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

#include "plumedial/dispersion.hpp"
#include "plumedial/geometry.hpp"
#include "plumedial/rng.hpp"

namespace plumedial {

enum class Wavelength { kOn, kOff };

// Henyey-Greenstein density over the scattering cosine, per steradian.
inline double hg_pdf(double cos_theta, double g) {
  if (std::abs(cos_theta) > 1.0 + 1e-12) throw std::invalid_argument("hg_pdf: |cos| > 1");
  const double denom = 1.0 + g * g - 2.0 * g * cos_theta;
  return 0.25 * M_1_PI * (1.0 - g * g) / (denom * std::sqrt(denom));
}

// Inversion sampling of the HG cosine; azimuth uniform around `incoming`.
inline double hg_sample_cos(double g, CounterRng& rng) {
  const double u = rng.uniform();
  if (std::abs(g) < 1e-6) return 1.0 - 2.0 * u;
  const double sq = (1.0 - g * g) / (1.0 - g + 2.0 * g * u);
  return (1.0 + g * g - sq * sq) / (2.0 * g);
}

inline Vec3 direction_from_cos(const Vec3& incoming, double cos_theta, CounterRng& rng) {
  const double sin_theta = std::sqrt(std::max(1.0 - cos_theta * cos_theta, 0.0));
  const double phi = 2.0 * M_PI * rng.uniform();
  const Frame frame(incoming);
  return frame.to_world(sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta);
}

inline Vec3 hg_sample(double g, const Vec3& incoming, CounterRng& rng) {
  return direction_from_cos(incoming, hg_sample_cos(g, rng), rng);
}

// Scattering phase function: isotropic, Henyey-Greenstein, or a mixture of a
// forward delta peak with a continuous base. The delta atom is carried
// separately so pdf() stays a plain density for the continuous part.
class PhaseFunction {
 public:
  PhaseFunction() = default;

  static PhaseFunction isotropic() { return PhaseFunction(); }

  static PhaseFunction henyey_greenstein(double g) {
    if (g < 0.0 || g > 0.7) throw std::invalid_argument("HG asymmetry must lie in [0, 0.7]");
    PhaseFunction p;
    p.g_ = g;
    return p;
  }

  static PhaseFunction delta_mix(double forward_weight, PhaseFunction base) {
    if (forward_weight < 0.0 || forward_weight > 1.0)
      throw std::invalid_argument("delta weight must lie in [0, 1]");
    PhaseFunction p;
    p.delta_ = forward_weight;
    p.base_g_ = base.g_;
    p.has_base_ = true;
    return p;
  }

  // Continuous density (1/sr); the forward atom is reported separately.
  double pdf(double cos_theta) const {
    const double cont = has_base_ ? (1.0 - delta_) : 1.0;
    return cont * hg_pdf(cos_theta, has_base_ ? base_g_ : g_);
  }

  double delta_weight() const { return has_base_ ? delta_ : 0.0; }

  double mean_cosine() const {
    if (has_base_) return delta_ + (1.0 - delta_) * base_g_;
    return g_;
  }

  double asymmetry() const { return has_base_ ? base_g_ : g_; }

  Vec3 sample(const Vec3& incoming, CounterRng& rng) const {
    if (has_base_ && rng.uniform() < delta_) return incoming;  // forward peak
    return hg_sample(has_base_ ? base_g_ : g_, incoming, rng);
  }

 private:
  double g_ = 0.0;        // HG asymmetry (0 = isotropic)
  double delta_ = 0.0;    // forward atom mass
  double base_g_ = 0.0;   // asymmetry of the continuous part of a mixture
  bool has_base_ = false;
};

// Folding a forward delta peak into the scattering coefficient: a phase
// with mean cosine lambda is equivalent to the zero-first-moment baseline
// with sigma_s scaled by (1 - lambda).
inline std::pair<double, PhaseFunction> delta_peak_reduce(double sigma_s,
                                                          const PhaseFunction& phase) {
  const double lambda = phase.mean_cosine();
  return {(1.0 - lambda) * sigma_s, PhaseFunction::isotropic()};
}

// Wavelength-dependent optical coefficients of the ambient atmosphere plus a
// gas plume. Scattering and phase are shared between the two wavelengths;
// only the absorption differs, by alpha(x) = c_ambient + c_dial * u(x).
struct OpticalScene {
  double sigma_a_ambient = 0.0;  // off-wavelength absorption (1/m)
  double sigma_s_ambient = 0.0;  // ambient scattering (1/m)
  double c_dial = 1.0;           // differential absorption per concentration (m^2/mol)
  double c_ambient = 0.0;        // homogeneous differential absorption offset (1/m)
  double scatter_scale = 0.0;    // c_s: sigma_s = sigma_s_ambient + c_s * u
  PlumeModel plume;              // u(x) and its parameter jacobian
  PhaseFunction phase;

  static OpticalScene from_dispersion(const DispersionParams& params, double sigma_a_ambient,
                                      double sigma_s_ambient, double c_dial, double c_ambient,
                                      PhaseFunction phase) {
    OpticalScene s;
    s.sigma_a_ambient = sigma_a_ambient;
    s.sigma_s_ambient = sigma_s_ambient;
    s.c_dial = c_dial;
    s.c_ambient = c_ambient;
    s.scatter_scale = params.scatter_scale;
    s.plume = discretize_release_model(params, params.n_puffs);
    s.phase = phase;
    return s;
  }

  double concentration(const Vec3& x) const { return plume.field.evaluate(x); }

  double sigma_s(const Vec3& x) const {
    return sigma_s_ambient + scatter_scale * concentration(x);
  }

  double alpha(const Vec3& x) const { return c_ambient + c_dial * concentration(x); }

  // sigma_s(x) as an explicit kernel field (scaled copy of the plume).
  KernelField scatter_field() const {
    KernelField f = plume.field;
    f.constant = sigma_s_ambient + scatter_scale * plume.field.constant;
    for (GaussianPuff& k : f.kernels) k.weight *= scatter_scale;
    return f;
  }

  KernelField alpha_field() const {
    KernelField f = plume.field;
    f.constant = c_ambient + c_dial * plume.field.constant;
    for (GaussianPuff& k : f.kernels) k.weight *= c_dial;
    return f;
  }

  // (sigma_a, sigma_s) at a point for the requested wavelength.
  std::pair<double, double> coefficients_at(const Vec3& x, Wavelength w) const {
    const double s = sigma_s(x);
    if (w == Wavelength::kOff) return {sigma_a_ambient, s};
    return {sigma_a_ambient + alpha(x), s};
  }
};

}  // namespace plumedial
