#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "plumedial/geometry.hpp"
#include "plumedial/linear_spline.hpp"

namespace plumedial {

// Layout of the 14-dimensional dispersion parameter vector: release rate,
// two ground source coordinates, five width knots, five drift knots and the
// scattering proportionality constant.
struct ThetaLayout {
  static constexpr int kRelease = 0;
  static constexpr int kSourceX = 1;
  static constexpr int kSourceY = 2;
  static constexpr int kWidth0 = 3;
  static constexpr int kDrift0 = 8;
  static constexpr int kScatter = 13;
  static constexpr int kDim = 14;
};

using ThetaVector = std::array<double, ThetaLayout::kDim>;

constexpr int kSplineKnots = 5;

struct DispersionParams {
  Vec3 source;                          // q (m); z is normally 0 (ground release)
  double release_rate = 1.0;            // rho_Q (mol/s for continuous release)
  PiecewiseConstant<Vec3> wind;         // w(t) (m/s), known
  PiecewiseLinear diffusion;            // h(t) (m^2), nondecreasing
  double ambient_level = 0.0;           // u0 (mol/m^3)
  LinearSpline<kSplineKnots> width_spline;  // kernel std dev vs downwind distance (m)
  LinearSpline<kSplineKnots> drift_spline;  // upward centreline drift vs downwind distance (m)
  double scatter_scale = 0.0;           // c_s, sigma_s = sigma_s_ambient + c_s * u
  double plume_length = 120.0;          // L (m)
  int n_puffs = 16;                     // release-time quadrature resolution
  double width_floor = 0.05;            // clamp for kernel bandwidths (m)

  ThetaVector theta() const {
    ThetaVector t{};
    t[ThetaLayout::kRelease] = release_rate;
    t[ThetaLayout::kSourceX] = source.x;
    t[ThetaLayout::kSourceY] = source.y;
    for (int k = 0; k < kSplineKnots; ++k) {
      t[ThetaLayout::kWidth0 + k] = width_spline.knots()[k];
      t[ThetaLayout::kDrift0 + k] = drift_spline.knots()[k];
    }
    t[ThetaLayout::kScatter] = scatter_scale;
    return t;
  }

  DispersionParams with_theta(const ThetaVector& t) const {
    DispersionParams p = *this;
    p.release_rate = t[ThetaLayout::kRelease];
    p.source.x = t[ThetaLayout::kSourceX];
    p.source.y = t[ThetaLayout::kSourceY];
    for (int k = 0; k < kSplineKnots; ++k) {
      p.width_spline.knots()[k] = t[ThetaLayout::kWidth0 + k];
      p.drift_spline.knots()[k] = t[ThetaLayout::kDrift0 + k];
    }
    p.scatter_scale = t[ThetaLayout::kScatter];
    return p;
  }

  void validate() const {
    if (release_rate < 0.0) throw std::invalid_argument("release_rate must be >= 0");
    if (ambient_level < 0.0) throw std::invalid_argument("ambient_level must be >= 0");
    if (!diffusion.nondecreasing()) throw std::invalid_argument("diffusion h(t) must be nondecreasing");
    for (double v : diffusion.values())
      if (v < 0.0) throw std::invalid_argument("diffusion h(t) must be >= 0");
    for (double w : width_spline.knots())
      if (w <= 0.0) throw std::invalid_argument("width spline knots must be > 0");
    if (plume_length <= 0.0) throw std::invalid_argument("plume_length must be > 0");
    if (scatter_scale < 0.0) throw std::invalid_argument("scatter_scale must be >= 0");
    if (n_puffs < 1) throw std::invalid_argument("n_puffs must be >= 1");
  }

  // Duration of the release interval covered by the puff discretisation:
  // the time needed for a puff to travel the plume length. A floor on the
  // wind speed keeps the calm-wind limit finite.
  double release_duration() const {
    const double speed = norm(wind.value(0.0));
    return plume_length / std::max(speed, 0.1);
  }
};

struct GaussianPuff {
  Vec3 center;       // m
  double bandwidth;  // std dev (m), > 0
  double weight;     // field amplitude at the centre
};

inline double kernel_profile(double x) { return std::exp(-0.5 * x * x); }

// Constant plus radial Gaussian kernels. Kernels are truncated at
// cutoff_sigmas so the field has effectively compact support; the line
// integral applies the same truncation, so both routes agree to machine
// precision.
struct KernelField {
  double constant = 0.0;  // w0
  std::vector<GaussianPuff> kernels;
  double cutoff_sigmas = 6.0;

  double evaluate(const Vec3& x) const {
    double acc = constant;
    for (const GaussianPuff& k : kernels) {
      const double r2 = norm_squared(x - k.center);
      const double c = cutoff_sigmas * k.bandwidth;
      if (r2 > c * c) continue;
      acc += k.weight * std::exp(-0.5 * r2 / (k.bandwidth * k.bandwidth));
    }
    return acc;
  }

  // Total kernel mass: integral of (field - w0) over R^3, ignoring the
  // truncation tail (< 1e-8 relative at 6 sigma).
  double kernel_mass() const {
    double acc = 0.0;
    for (const GaussianPuff& k : kernels)
      acc += k.weight * std::pow(2.0 * M_PI * k.bandwidth * k.bandwidth, 1.5);
    return acc;
  }
};

// Sensitivity of one discretised puff to the 14 dispersion parameters.
// weight = rho_Q * d_amp, bandwidth = width_spline(l), center z offset =
// drift_spline(l); the bases carry the active hat-function weights.
struct PuffJacobian {
  double d_amp_d_rate = 0.0;  // d(weight)/d(rho_Q)
  SplineBasis width_basis;
  SplineBasis drift_basis;
};

struct PlumeModel {
  KernelField field;
  std::vector<PuffJacobian> jacobian;  // one entry per kernel
};

// Instantaneous point release: u(x, t) = rho_Q (2 pi h(t))^{-3/2}
// exp(-|x - m_q(t)|^2 / (2 h(t))) with m_q(t) = q + int_0^t w.  h(t) is the
// accumulated variance here, not a standard deviation.
inline double evaluate_puff(const DispersionParams& params, const Vec3& x, double t) {
  if (t <= 0.0) throw std::domain_error("evaluate_puff: t must be > 0");
  const double h = params.diffusion.value(t);
  if (h <= 0.0) throw std::domain_error("evaluate_puff: degenerate puff, h(t) = 0");
  const Vec3 center = params.source + params.wind.integral(t);
  const double r2 = norm_squared(x - center);
  return params.release_rate * std::pow(2.0 * M_PI * h, -1.5) * std::exp(-0.5 * r2 / h);
}

// Continuous release as a superposition of puffs placed along the
// wind-advected centreline. Puff ages cover [0, T] with trapezoidal
// weights; bandwidths come from the width spline and vertical offsets from
// the drift spline, both indexed by downwind distance.
inline PlumeModel discretize_release_model(const DispersionParams& params, int n_puffs) {
  if (n_puffs < 1) throw std::invalid_argument("discretize_release: n_puffs must be >= 1");
  const double duration = params.release_duration();

  PlumeModel model;
  model.field.constant = params.ambient_level;
  model.field.kernels.reserve(n_puffs);
  model.jacobian.reserve(n_puffs);

  for (int i = 0; i < n_puffs; ++i) {
    double age, dt;
    if (n_puffs == 1) {
      age = 0.5 * duration;
      dt = duration;
    } else {
      age = duration * i / (n_puffs - 1);
      dt = duration / (n_puffs - 1) * ((i == 0 || i == n_puffs - 1) ? 0.5 : 1.0);
    }
    const Vec3 advect = params.wind.integral(age);
    const double downwind = std::hypot(advect.x, advect.y);
    SplineBasis wb = params.width_spline.basis(downwind);
    const SplineBasis db = params.drift_spline.basis(downwind);
    const double raw_width = params.width_spline.value(downwind);
    const double bandwidth = std::max(raw_width, params.width_floor);
    if (raw_width < params.width_floor) wb.b0 = wb.b1 = 0.0;  // clamped: knots have no effect
    const double drift = params.drift_spline.value(downwind);

    GaussianPuff puff;
    puff.center = params.source + advect + Vec3(0.0, 0.0, drift);
    puff.bandwidth = bandwidth;
    const double d_amp = dt * std::pow(2.0 * M_PI * bandwidth * bandwidth, -1.5);
    puff.weight = params.release_rate * d_amp;
    model.field.kernels.push_back(puff);
    model.jacobian.push_back({d_amp, wb, db});
  }
  return model;
}

inline KernelField discretize_release(const DispersionParams& params, int n_puffs) {
  return discretize_release_model(params, n_puffs).field;
}

inline double evaluate_field(const KernelField& field, const Vec3& x) { return field.evaluate(x); }

namespace detail {

// Scatters per-kernel partials (d/d amplitude, d/d center, d/d bandwidth)
// into the 14-parameter gradient through the puff jacobian.
inline void accumulate_theta(const GaussianPuff& k, const PuffJacobian& jac, double d_amp,
                             const Vec3& d_center, double d_bandwidth, ThetaVector& grad) {
  grad[ThetaLayout::kRelease] += d_amp * jac.d_amp_d_rate;
  grad[ThetaLayout::kSourceX] += d_center.x;
  grad[ThetaLayout::kSourceY] += d_center.y;
  // weight = rho_Q * dt * (2 pi h^2)^{-3/2} depends on the bandwidth too.
  const double d_width = d_bandwidth - 3.0 * d_amp * k.weight / k.bandwidth;
  const SplineBasis& wb = jac.width_basis;
  grad[ThetaLayout::kWidth0 + wb.i0] += d_width * wb.b0;
  grad[ThetaLayout::kWidth0 + wb.i1] += d_width * wb.b1;
  const SplineBasis& db = jac.drift_basis;
  grad[ThetaLayout::kDrift0 + db.i0] += d_center.z * db.b0;
  grad[ThetaLayout::kDrift0 + db.i1] += d_center.z * db.b1;
}

}  // namespace detail

// Gradient of the kernel field value with respect to the 14 parameters.
inline ThetaVector field_value_gradient(const PlumeModel& model, const Vec3& x) {
  ThetaVector grad{};
  const KernelField& f = model.field;
  for (std::size_t j = 0; j < f.kernels.size(); ++j) {
    const GaussianPuff& k = f.kernels[j];
    const Vec3 d = x - k.center;
    const double r2 = norm_squared(d);
    const double c = f.cutoff_sigmas * k.bandwidth;
    if (r2 > c * c) continue;
    const double h2 = k.bandwidth * k.bandwidth;
    const double phi = std::exp(-0.5 * r2 / h2);
    const double value = k.weight * phi;
    // d/d amplitude = phi; d/d center = value * d / h^2; d/d h = value r^2/h^3.
    detail::accumulate_theta(k, model.jacobian[j], phi, d * (value / h2),
                             value * r2 / (h2 * k.bandwidth), grad);
  }
  return grad;
}

inline ThetaVector field_gradient(const DispersionParams& params, const Vec3& x) {
  const PlumeModel model = discretize_release_model(params, params.n_puffs);
  return field_value_gradient(model, x);
}

namespace detail {

struct KernelLineGeometry {
  double s_star;   // ray parameter of the closest approach to the kernel centre
  double d2;       // squared perpendicular distance
  double clip_lo;  // integration bounds after the cutoff-sphere clip
  double clip_hi;
  bool hit;
};

inline KernelLineGeometry kernel_line_geometry(const GaussianPuff& k, const Vec3& origin,
                                               const Vec3& dir, double s0, double s1,
                                               double cutoff_sigmas) {
  KernelLineGeometry g{};
  const Vec3 to_center = k.center - origin;
  g.s_star = dot(to_center, dir);
  g.d2 = std::max(norm_squared(to_center) - g.s_star * g.s_star, 0.0);
  const double c = cutoff_sigmas * k.bandwidth;
  const double disc = c * c - g.d2;
  if (disc <= 0.0) {
    g.hit = false;
    return g;
  }
  const double half = std::sqrt(disc);
  g.clip_lo = std::max(s0, g.s_star - half);
  g.clip_hi = std::min(s1, g.s_star + half);
  g.hit = g.clip_lo < g.clip_hi;
  return g;
}

}  // namespace detail

// Exact line integral of the field along origin + s * dir for s in [s0, s1]
// via the 1-D Gaussian reduction: each kernel contributes
//   w e^{-d^2/(2h^2)} h sqrt(pi/2) [erf((b - s*)/(h sqrt 2)) - erf((a - s*)/(h sqrt 2))]
// on the part of the segment inside its cutoff sphere; the constant term
// contributes w0 (s1 - s0).
inline double line_integral(const KernelField& field, const Vec3& origin, const Vec3& dir,
                            double s0, double s1) {
  if (s0 > s1) throw std::invalid_argument("line_integral: s0 must be <= s1");
  constexpr double kSqrtHalfPi = 1.2533141373155003;  // sqrt(pi/2)
  constexpr double kInvSqrt2 = 0.7071067811865476;
  double acc = field.constant * (s1 - s0);
  for (const GaussianPuff& k : field.kernels) {
    const auto g = detail::kernel_line_geometry(k, origin, dir, s0, s1, field.cutoff_sigmas);
    if (!g.hit) continue;
    const double inv_h = 1.0 / k.bandwidth;
    const double amp = k.weight * std::exp(-0.5 * g.d2 * inv_h * inv_h);
    const double erf_hi = std::erf((g.clip_hi - g.s_star) * inv_h * kInvSqrt2);
    const double erf_lo = std::erf((g.clip_lo - g.s_star) * inv_h * kInvSqrt2);
    acc += amp * k.bandwidth * kSqrtHalfPi * (erf_hi - erf_lo);
  }
  return acc;
}

// Line integral together with its gradient in the 14 parameters. The
// truncation boundary is treated as fixed (its integrand is ~e^{-18} of the
// peak, far below the accuracy of interest).
inline double line_integral_with_gradient(const PlumeModel& model, const Vec3& origin,
                                          const Vec3& dir, double s0, double s1,
                                          ThetaVector& grad) {
  if (s0 > s1) throw std::invalid_argument("line_integral: s0 must be <= s1");
  constexpr double kSqrtHalfPi = 1.2533141373155003;
  constexpr double kInvSqrt2 = 0.7071067811865476;
  constexpr double kTwoOverSqrtPi = 1.1283791670955126;
  grad = ThetaVector{};
  const KernelField& field = model.field;
  double acc = field.constant * (s1 - s0);
  for (std::size_t j = 0; j < field.kernels.size(); ++j) {
    const GaussianPuff& k = field.kernels[j];
    const auto g = detail::kernel_line_geometry(k, origin, dir, s0, s1, field.cutoff_sigmas);
    if (!g.hit) continue;
    const double h = k.bandwidth;
    const double inv_h = 1.0 / h;
    const double gauss_perp = std::exp(-0.5 * g.d2 * inv_h * inv_h);
    const double zhi = (g.clip_hi - g.s_star) * inv_h * kInvSqrt2;
    const double zlo = (g.clip_lo - g.s_star) * inv_h * kInvSqrt2;
    const double erf_diff = std::erf(zhi) - std::erf(zlo);
    const double profile = gauss_perp * h * kSqrtHalfPi * erf_diff;  // integral per unit weight
    const double value = k.weight * profile;
    acc += value;

    // Endpoint Gaussians for the erf derivatives.
    const double ehi = std::exp(-zhi * zhi);
    const double elo = std::exp(-zlo * zlo);
    // d(erf_diff)/d(s_star) = -(sqrt(2/pi)/h)(ehi - elo)
    const double derf_dsstar = -kTwoOverSqrtPi * inv_h * kInvSqrt2 * (ehi - elo);
    // d(erf_diff)/dh = -(zhi ehi - zlo elo) * 2/sqrt(pi) / h
    const double derf_dh = -kTwoOverSqrtPi * inv_h * (zhi * ehi - zlo * elo);

    // Chain to the kernel centre: s_star = (m - o) . dir, d2 = |m - o|^2 - s_star^2.
    const Vec3 to_center = k.center - origin;
    const Vec3 dd2_dm = (to_center - dir * g.s_star) * 2.0;
    const double common = k.weight * h * kSqrtHalfPi;
    const Vec3 d_center = dd2_dm * (-0.5 * inv_h * inv_h * value) +
                          dir * (common * gauss_perp * derf_dsstar);
    const double d_h = value * inv_h                        // from the h prefactor
                       + value * g.d2 * inv_h * inv_h * inv_h  // from the perpendicular Gaussian
                       + common * gauss_perp * derf_dh;
    detail::accumulate_theta(k, model.jacobian[j], profile, d_center, d_h, grad);
  }
  return acc;
}

}  // namespace plumedial
