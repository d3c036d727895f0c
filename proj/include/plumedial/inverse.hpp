#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "plumedial/dispersion.hpp"
#include "plumedial/field_grid.hpp"
#include "plumedial/forward.hpp"
#include "plumedial/measurement.hpp"
#include "plumedial/small_matrix.hpp"

namespace plumedial {

// Per-bin multiplicative nuisance psi, same layout as the measurement.
struct NuisanceField {
  int n_fov = 0, n_dir = 0, n_bins = 0;
  std::vector<double> psi;
  std::vector<std::uint8_t> flagged;  // zero response with nonzero count
  std::size_t idx(int f, int d, int b) const {
    return (static_cast<std::size_t>(f) * n_dir + d) * n_bins + b;
  }
};

// Closed-form profile of the nuisance: psi* = (m + n) / (H dt A (m_on + m_off)).
inline NuisanceField profile_nuisance(const ScanResponse& response, const MeasurementSet& data) {
  if (response.on.size() != data.counts_on.size())
    throw std::invalid_argument("profile_nuisance: shape mismatch");
  NuisanceField out;
  out.n_fov = data.n_fov;
  out.n_dir = data.n_dir;
  out.n_bins = data.n_bins;
  out.psi.assign(data.size(), 0.0);
  out.flagged.assign(data.size(), 0);
  const double source =
      data.config.effective_pulse_photons() * data.binning.dt * data.config.detector_area;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const long counts = data.counts_on[i] + data.counts_off[i];
    const double denom = source * (response.on[i] + response.off[i]);
    if (counts == 0) {
      out.psi[i] = 0.0;
    } else if (denom <= 0.0) {
      out.flagged[i] = 1;  // excluded from the loss
    } else {
      out.psi[i] = static_cast<double>(counts) / denom;
    }
  }
  return out;
}

// Smoothness penalty on the spline knots plus a quadratic pull on the
// scattering proportionality. The Hessian is constant and PSD.
struct Regularizer {
  double width_weight = 10.0;
  double drift_weight = 10.0;
  double scatter_center = 0.0;
  double scatter_weight = 0.0;

  double value(const ThetaVector& t) const {
    double acc = 0.0;
    for (int k = 0; k + 2 < kSplineKnots; ++k) {
      const double dw = t[ThetaLayout::kWidth0 + k] - 2.0 * t[ThetaLayout::kWidth0 + k + 1] +
                        t[ThetaLayout::kWidth0 + k + 2];
      const double dd = t[ThetaLayout::kDrift0 + k] - 2.0 * t[ThetaLayout::kDrift0 + k + 1] +
                        t[ThetaLayout::kDrift0 + k + 2];
      acc += width_weight * dw * dw + drift_weight * dd * dd;
    }
    const double ds = t[ThetaLayout::kScatter] - scatter_center;
    return acc + scatter_weight * ds * ds;
  }

  ThetaVector gradient(const ThetaVector& t) const {
    ThetaVector g{};
    for (int k = 0; k + 2 < kSplineKnots; ++k) {
      const double dw = t[ThetaLayout::kWidth0 + k] - 2.0 * t[ThetaLayout::kWidth0 + k + 1] +
                        t[ThetaLayout::kWidth0 + k + 2];
      g[ThetaLayout::kWidth0 + k] += 2.0 * width_weight * dw;
      g[ThetaLayout::kWidth0 + k + 1] -= 4.0 * width_weight * dw;
      g[ThetaLayout::kWidth0 + k + 2] += 2.0 * width_weight * dw;
      const double dd = t[ThetaLayout::kDrift0 + k] - 2.0 * t[ThetaLayout::kDrift0 + k + 1] +
                        t[ThetaLayout::kDrift0 + k + 2];
      g[ThetaLayout::kDrift0 + k] += 2.0 * drift_weight * dd;
      g[ThetaLayout::kDrift0 + k + 1] -= 4.0 * drift_weight * dd;
      g[ThetaLayout::kDrift0 + k + 2] += 2.0 * drift_weight * dd;
    }
    g[ThetaLayout::kScatter] += 2.0 * scatter_weight * (t[ThetaLayout::kScatter] - scatter_center);
    return g;
  }

  Matrix hessian() const {
    Matrix h(ThetaLayout::kDim, ThetaLayout::kDim);
    std::vector<double> row(ThetaLayout::kDim, 0.0);
    for (int k = 0; k + 2 < kSplineKnots; ++k) {
      for (int base : {ThetaLayout::kWidth0, ThetaLayout::kDrift0}) {
        const double w = base == ThetaLayout::kWidth0 ? width_weight : drift_weight;
        std::fill(row.begin(), row.end(), 0.0);
        row[base + k] = 1.0;
        row[base + k + 1] = -2.0;
        row[base + k + 2] = 1.0;
        h.add_outer(row, 2.0 * w);
      }
    }
    h(ThetaLayout::kScatter, ThetaLayout::kScatter) += 2.0 * scatter_weight;
    return h;
  }
};

// Profiled binomial loss and its pieces for one response/data pair: the data
// term is -sum m log P - sum n log(1 - P) with P = m_on / (m_on + m_off);
// bins with no counts or flagged responses drop out.
struct LossBreakdown {
  double data_term = 0.0;
  double penalty = 0.0;
  double total() const { return data_term + penalty; }
};

inline LossBreakdown profiled_loss(const ScanResponse& response, const MeasurementSet& data,
                                   const Regularizer& reg, const ThetaVector& theta) {
  if (response.on.size() != data.counts_on.size())
    throw std::invalid_argument("profiled_loss: shape mismatch");
  LossBreakdown out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const long m = data.counts_on[i];
    const long n = data.counts_off[i];
    if (m + n == 0) continue;
    const double sum = response.on[i] + response.off[i];
    if (sum <= 0.0) continue;  // flagged bin
    const double p = response.on[i] / sum;
    if (!(p > 0.0 && p < 1.0)) {
      if (p == 0.0 && m == 0) {
        // log(1 - P) = 0 contribution only
        continue;
      }
      if (p == 1.0 && n == 0) continue;
      throw std::domain_error("profiled_loss: P outside (0, 1) with counts present");
    }
    out.data_term -= static_cast<double>(m) * std::log(p) + static_cast<double>(n) * std::log1p(-p);
  }
  out.penalty = reg.value(theta);
  return out;
}

// One-sigma band of the profiled data term induced by the solver's Monte
// Carlo noise, by linear propagation of the per-bin response errors.
inline double profiled_loss_noise(const ScanResponse& response, const MeasurementSet& data) {
  if (response.se_on.empty()) return 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const long m = data.counts_on[i];
    const long n = data.counts_off[i];
    if (m + n == 0) continue;
    const double on = response.on[i];
    const double off = response.off[i];
    const double sum = on + off;
    if (sum <= 0.0) continue;
    const double p = on / sum;
    if (!(p > 0.0 && p < 1.0)) continue;
    // d loss / d m_on = -(m/p - n/(1-p)) off / sum^2, symmetric for off.
    const double resid = static_cast<double>(m) / p - static_cast<double>(n) / (1.0 - p);
    const double d_on = -resid * off / (sum * sum);
    const double d_off = resid * on / (sum * sum);
    var += d_on * d_on * response.se_on[i] * response.se_on[i] +
           d_off * d_off * response.se_off[i] * response.se_off[i];
  }
  return std::sqrt(var);
}

// Joint Poisson loss at explicit nuisance values (the unprofiled objective).
inline double joint_loss(const ScanResponse& response, const MeasurementSet& data,
                         const std::vector<double>& psi, const Regularizer& reg,
                         const ThetaVector& theta) {
  const double source =
      data.config.effective_pulse_photons() * data.binning.dt * data.config.detector_area;
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const long m = data.counts_on[i];
    const long n = data.counts_off[i];
    acc += source * (response.on[i] + response.off[i]) * psi[i];
    if (m > 0) acc -= m * std::log(psi[i] * response.on[i]);
    if (n > 0) acc -= n * std::log(psi[i] * response.off[i]);
  }
  return acc + reg.value(theta);
}

// Gradient and Fisher matrix of the profiled loss. H = hess(R) +
// sum (m + n) dP dP^T / (P (1 - P)).
struct LossDerivatives {
  ThetaVector gradient{};
  Matrix fisher;
};

inline LossDerivatives loss_derivatives(const ScanResponse& response, const MeasurementSet& data,
                                        const Regularizer& reg, const ThetaVector& theta) {
  LossDerivatives out;
  out.fisher = reg.hessian();
  const ThetaVector reg_grad = reg.gradient(theta);
  for (int c = 0; c < ThetaLayout::kDim; ++c) out.gradient[c] = reg_grad[c];

  std::vector<double> dp(ThetaLayout::kDim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const long m = data.counts_on[i];
    const long n = data.counts_off[i];
    if (m + n == 0) continue;
    const double on = response.on[i];
    const double off = response.off[i];
    const double sum = on + off;
    if (sum <= 0.0) continue;
    const double p = on / sum;
    if (!(p > 0.0 && p < 1.0)) continue;
    const double inv_sum2 = 1.0 / (sum * sum);
    for (int c = 0; c < ThetaLayout::kDim; ++c) {
      const double g_on = response.grad_on[i * ThetaLayout::kDim + c];
      const double g_off = response.grad_off[i * ThetaLayout::kDim + c];
      dp[c] = (off * g_on - on * g_off) * inv_sum2;
    }
    const double w = static_cast<double>(m + n) / (p * (1.0 - p));
    out.fisher.add_outer(dp, w);
    const double resid = static_cast<double>(m) / p - static_cast<double>(n) / (1.0 - p);
    for (int c = 0; c < ThetaLayout::kDim; ++c) out.gradient[c] -= resid * dp[c];
  }
  return out;
}

// Lower bounds projected after each step.
struct ThetaBounds {
  double min_release = 0.0;
  double min_width = 0.1;
  double min_scatter = 0.0;

  void project(ThetaVector& t) const {
    t[ThetaLayout::kRelease] = std::max(t[ThetaLayout::kRelease], min_release);
    for (int k = 0; k < kSplineKnots; ++k)
      t[ThetaLayout::kWidth0 + k] = std::max(t[ThetaLayout::kWidth0 + k], min_width);
    t[ThetaLayout::kScatter] = std::max(t[ThetaLayout::kScatter], min_scatter);
  }
};

// One Fisher-scoring update: theta' = proj(theta - zeta H^{-1} grad), with
// Levenberg damping escalated until H is positive definite.
inline ThetaVector fisher_scoring_step(const ThetaVector& theta, const LossDerivatives& d,
                                       double zeta, const ThetaBounds& bounds,
                                       double initial_damping = 0.0) {
  if (zeta == 0.0) return theta;
  double trace = 0.0;
  for (int c = 0; c < ThetaLayout::kDim; ++c) trace += d.fisher(c, c);
  double damping = initial_damping;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Matrix h = d.fisher;
    for (int c = 0; c < ThetaLayout::kDim; ++c)
      h(c, c) += damping + 1e-12 * std::max(trace, 1.0);
    Matrix chol = h;
    if (!cholesky_factor(chol)) {
      damping = damping == 0.0 ? 1e-8 * std::max(trace, 1.0) : damping * 10.0;
      continue;
    }
    const std::vector<double> g(d.gradient.begin(), d.gradient.end());
    const std::vector<double> step = cholesky_solve(chol, g);
    ThetaVector next = theta;
    for (int c = 0; c < ThetaLayout::kDim; ++c) next[c] -= zeta * step[c];
    bounds.project(next);
    return next;
  }
  throw std::runtime_error("fisher_scoring_step: Fisher matrix singular beyond max damping");
}

struct FitConfig {
  int max_iterations = 25;
  double tol = 1e-5;              // relative loss change
  int max_backtracks = 8;
  Regularizer regularizer;
  ThetaBounds bounds;
  std::uint64_t seed = 1;
  bool verbose = false;
};

struct FitResult {
  DispersionParams params;
  ThetaVector theta{};
  std::vector<double> loss_trace;
  NuisanceField nuisance;
  Matrix covariance;
  bool converged = false;
  int iterations = 0;
  std::uint64_t seed = 0;
};

// Semi-parametric maximum likelihood: the nuisance is profiled in closed
// form, theta moves by damped Fisher scoring with a backtracking step size.
// Responses (and gradients) come from the forward model; seeds are frozen
// within each line search so backtracking compares like with like, and
// refreshed across outer iterations.
inline FitResult fit(const ScanForwardModel& model, const MeasurementSet& data,
                     const DispersionParams& theta0, const FitConfig& config) {
  FitResult result;
  result.params = theta0;
  result.seed = config.seed;
  ThetaVector theta = theta0.theta();
  const CounterRng seed_stream(CounterRng::mix(config.seed ^ 0x5eedf17ull));

  for (int it = 0; it < config.max_iterations; ++it) {
    const std::uint64_t iter_seed = CounterRng(seed_stream).child(it).key();
    const DispersionParams params = theta0.with_theta(theta);
    const ScanResponse response = model.evaluate(params, true, iter_seed);
    const double loss = profiled_loss(response, data, config.regularizer, theta).total();
    // Solver noise makes the common-random-number loss surface rough at the
    // scale of the propagated standard error; the line search tolerates
    // fluctuations inside a fraction of that band.
    const double band = profiled_loss_noise(response, data);
    result.loss_trace.push_back(loss);
    if (config.verbose)
      std::fprintf(stderr, "iter %d loss %.8e band %.2e\n", it, loss, band);

    const LossDerivatives d = loss_derivatives(response, data, config.regularizer, theta);

    // Backtracking on the same seed: halve the step until the loss drops
    // (up to the noise band).
    double zeta = 1.0;
    ThetaVector accepted = theta;
    double accepted_loss = loss;
    bool moved = false;
    for (int bt = 0; bt <= config.max_backtracks; ++bt) {
      const ThetaVector trial = fisher_scoring_step(theta, d, zeta, config.bounds);
      const ScanResponse trial_resp =
          model.evaluate(theta0.with_theta(trial), false, iter_seed);
      const double trial_loss =
          profiled_loss(trial_resp, data, config.regularizer, trial).total();
      if (trial_loss < loss + 0.25 * band) {
        accepted = trial;
        accepted_loss = trial_loss;
        moved = true;
        break;
      }
      zeta *= 0.5;
    }

    const double change = std::abs(loss - accepted_loss);
    theta = accepted;
    result.iterations = it + 1;
    if (!moved || change < config.tol * std::max(std::abs(loss), 1.0) + 0.5 * band) {
      result.converged = moved || it > 0;
      break;
    }
  }

  const DispersionParams final_params = theta0.with_theta(theta);
  const ScanResponse response = model.evaluate(final_params, true, CounterRng(seed_stream).child(9999).key());
  result.loss_trace.push_back(profiled_loss(response, data, config.regularizer, theta).total());
  result.theta = theta;
  result.params = final_params;
  result.nuisance = profile_nuisance(response, data);
  const LossDerivatives d = loss_derivatives(response, data, config.regularizer, theta);
  Matrix h = d.fisher;
  double trace = 0.0;
  for (int c = 0; c < ThetaLayout::kDim; ++c) trace += h(c, c);
  for (int c = 0; c < ThetaLayout::kDim; ++c) h(c, c) += 1e-10 * std::max(trace, 1.0);
  result.covariance = inverse_spd(h);
  return result;
}

// Coarse screen over source offsets around the nominal guess, profiled loss
// as the objective at a reduced path budget; seeds the Fisher scoring.
inline DispersionParams coarse_source_screen(const ScanForwardModel& model,
                                             const MeasurementSet& data,
                                             const DispersionParams& nominal,
                                             const Regularizer& reg, double offset = 8.0) {
  ScanForwardModel screen = model;
  screen.solver.n_paths = std::max<long>(model.solver.n_paths / 2, 4000);
  DispersionParams best = nominal;
  double best_loss = 1e300;
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      DispersionParams cand = nominal;
      cand.source.x += offset * dx;
      cand.source.y += offset * dy;
      const ScanResponse resp = screen.evaluate(cand, false, 17);
      const double loss = profiled_loss(resp, data, reg, cand.theta()).total();
      if (loss < best_loss) {
        best_loss = loss;
        best = cand;
      }
    }
  }
  return best;
}

// Reconstruction error metrics: relative L1 distance of the differential
// absorption fields on a shared grid and the relative release-rate error.
struct ErrorMetrics {
  double l1_rel = 0.0;
  double release_rel = 0.0;
};

inline ErrorMetrics error_metrics(const DispersionParams& estimate, const DispersionParams& truth,
                                  int grid_resolution = 48) {
  const KernelField est = discretize_release(estimate, estimate.n_puffs);
  const KernelField ref = discretize_release(truth, truth.n_puffs);
  if (truth.release_rate <= 0.0) throw std::domain_error("error_metrics: zero-mass truth");
  FieldGrid grid = FieldGrid::covering(ref);
  // Cover both supports.
  const FieldGrid eg = FieldGrid::covering(est);
  grid.lo = Vec3(std::min(grid.lo.x, eg.lo.x), std::min(grid.lo.y, eg.lo.y),
                 std::min(grid.lo.z, eg.lo.z));
  grid.hi = Vec3(std::max(grid.hi.x, eg.hi.x), std::max(grid.hi.y, eg.hi.y),
                 std::max(grid.hi.z, eg.hi.z));
  grid.nx = grid.ny = grid_resolution;
  grid.nz = grid_resolution / 2;
  ErrorMetrics out;
  out.l1_rel = l1_divergence(est, ref, grid);
  out.release_rel = std::abs(estimate.release_rate - truth.release_rate) / truth.release_rate;
  return out;
}

}  // namespace plumedial
