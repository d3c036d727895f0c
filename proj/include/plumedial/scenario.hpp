#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "plumedial/detector.hpp"
#include "plumedial/dispersion.hpp"
#include "plumedial/forward.hpp"
#include "plumedial/inverse.hpp"
#include "plumedial/measurement.hpp"
#include "plumedial/turbulence.hpp"

namespace plumedial {

constexpr int kSchemaMajor = 1;
constexpr int kSchemaMinor = 0;

inline std::string schema_version() {
  return std::to_string(kSchemaMajor) + "." + std::to_string(kSchemaMinor);
}

// Readers accept any minor revision of the current major.
inline void check_schema(const std::string& version, const std::string& what) {
  const auto dot = version.find('.');
  const int major = std::stoi(version.substr(0, dot));
  if (major != kSchemaMajor)
    throw std::runtime_error(what + ": unsupported schema major version " + version);
}

enum class FovMode { kNarrow, kWide, kMultiple };

inline FovMode fov_mode_from_string(const std::string& s) {
  if (s == "narrow") return FovMode::kNarrow;
  if (s == "wide") return FovMode::kWide;
  if (s == "multiple") return FovMode::kMultiple;
  throw std::runtime_error("unknown FOV mode: " + s);
}

inline std::string to_string(FovMode m) {
  switch (m) {
    case FovMode::kNarrow: return "narrow";
    case FovMode::kWide: return "wide";
    default: return "multiple";
  }
}

// Grid specification for the detection-power maps.
struct PowerGridSpec {
  std::vector<double> sigma0;   // ambient optical depth to the kernel centre
  std::vector<double> sigma_s;  // plume optical thickness through the centre
  std::vector<double> g;        // HG asymmetry for the candidate set
  double g_truth = 0.0;
  double sigma0_bound = -1.0;   // candidate constraint; < 0 means unconstrained
  double kernel_radius = 20.0;  // m
  double distance = 100.0;      // m
  double alpha_amplitude = 1e-3;
  long n_paths = 30000;
  int k_max = 6;
};

// Everything a run needs: dispersion truth, optics, geometry, acquisition,
// solver budgets and seeds.
struct Scenario {
  DispersionParams dispersion;
  double sigma_a_ambient = 0.0;
  double sigma_s_ambient = 1e-5;
  double c_dial = 8.0;
  double c_ambient = 0.0;
  PhaseFunction phase = PhaseFunction::henyey_greenstein(0.3);
  PhaseFunction reconstruction_phase = PhaseFunction::henyey_greenstein(0.3);

  Detector detector;  // apertures filled from narrow/wide half-angles + mode
  double narrow_half_angle = 5e-4;
  double wide_half_angle = 0.02;
  ScanGrid scan;
  TimeBinning binning{50, 150.0, 4.0};

  double pulse_energy_j = 250e-6;
  double wavelength_on_nm = 1645.55;
  double wavelength_off_nm = 1646.0;
  double efficiency = 0.04;
  double ambient_power_w = 0.025;
  int pulses_per_direction = 1;

  long n_paths = 20000;
  int k_max = 8;
  std::uint64_t seed = 1;
  int threads = 0;

  FitConfig fit;
  double fit_init_release_scale = 1.0;  // starting guess relative to nominal
  bool turbulent = false;
  TurbulenceConfig turbulence;
  PowerGridSpec power_grid;

  std::vector<FovAperture> apertures(FovMode mode) const {
    switch (mode) {
      case FovMode::kNarrow:
        return {FovAperture::cone(narrow_half_angle)};
      case FovMode::kWide:
        return {FovAperture::cone(wide_half_angle)};
      default:
        return {FovAperture::cone(narrow_half_angle),
                FovAperture::annulus(narrow_half_angle, wide_half_angle)};
    }
  }

  std::vector<SolverKind> solver_kinds(FovMode mode) const {
    switch (mode) {
      case FovMode::kNarrow:
        return {SolverKind::kAnalyticSingleScatter};
      case FovMode::kWide:
        return {SolverKind::kMonteCarlo};
      default:
        return {SolverKind::kAnalyticSingleScatter, SolverKind::kMonteCarlo};
    }
  }

  ScanForwardModel forward_model(FovMode mode, bool for_reconstruction = false) const {
    ScanForwardModel m;
    m.detector = detector;
    m.detector.fov_apertures = apertures(mode);
    m.detector.efficiency = efficiency;
    m.grid = scan;
    m.binning = binning;
    m.solver.n_paths = n_paths;
    m.solver.k_max = k_max;
    m.solver.n_threads = threads;
    m.fov_solver = solver_kinds(mode);
    m.sigma_a_ambient = sigma_a_ambient;
    m.sigma_s_ambient = sigma_s_ambient;
    m.c_dial = c_dial;
    m.c_ambient = c_ambient;
    m.phase = for_reconstruction ? reconstruction_phase : phase;
    if (for_reconstruction) {
      // 0.01 expected counts in kernel-density units.
      const AcquisitionConfig a = acquisition(mode);
      m.response_floor = 0.01 / (a.effective_pulse_photons() * binning.dt * detector.area);
    }
    return m;
  }

  AcquisitionConfig acquisition(FovMode mode) const {
    AcquisitionConfig a;
    a.pulse_photons = photons_per_pulse(pulse_energy_j, wavelength_on_nm * 1e-9);
    a.efficiency = efficiency;
    a.detector_area = detector.area;
    a.pulses_per_direction = pulses_per_direction;
    a.wavelength_on_m = wavelength_on_nm * 1e-9;
    a.wavelength_off_m = wavelength_off_nm * 1e-9;
    for (const FovAperture& f : apertures(mode))
      a.ambient_rate_per_fov.push_back(ambient_rate(ambient_power_w, a.wavelength_on_m,
                                                    f.solid_angle(), detector.area));
    return a;
  }
};

namespace detail {

template <typename T>
T require(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key))
    throw std::runtime_error("scenario: missing required field '" + key + "'");
  return j.at(key).get<T>();
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline PhaseFunction parse_phase(const nlohmann::json& j) {
  const std::string type = get_or<std::string>(j, "type", "hg");
  if (type == "isotropic") return PhaseFunction::isotropic();
  if (type == "hg") return PhaseFunction::henyey_greenstein(require<double>(j, "g"));
  if (type == "delta_mix")
    return PhaseFunction::delta_mix(require<double>(j, "forward_weight"),
                                    PhaseFunction::isotropic());
  throw std::runtime_error("scenario: unknown phase type " + type);
}

}  // namespace detail

inline Scenario load_scenario(const nlohmann::json& j) {
  using detail::get_or;
  using detail::require;
  check_schema(get_or<std::string>(j, "schema_version", schema_version()), "scenario");

  Scenario s;
  const auto& d = j.at("dispersion");
  s.dispersion.release_rate = require<double>(d, "release_rate_mol_s");
  const auto src = require<std::vector<double>>(d, "source_xy_m");
  if (src.size() != 2) throw std::runtime_error("scenario: source_xy_m needs 2 entries");
  s.dispersion.source = Vec3(src[0], src[1], 0.0);
  const auto wind = require<std::vector<double>>(d, "wind_m_s");
  if (wind.size() != 3) throw std::runtime_error("scenario: wind_m_s needs 3 entries");
  s.dispersion.wind = PiecewiseConstant<Vec3>(Vec3(wind[0], wind[1], wind[2]));
  const auto widths = require<std::vector<double>>(d, "width_spline_m");
  const auto drifts = require<std::vector<double>>(d, "drift_spline_m");
  if (widths.size() != kSplineKnots || drifts.size() != kSplineKnots)
    throw std::runtime_error("scenario: splines need 5 knots");
  s.dispersion.plume_length = get_or<double>(d, "plume_length_m", 120.0);
  std::array<double, kSplineKnots> w{}, dr{};
  std::copy(widths.begin(), widths.end(), w.begin());
  std::copy(drifts.begin(), drifts.end(), dr.begin());
  s.dispersion.width_spline = LinearSpline<kSplineKnots>(w, s.dispersion.plume_length);
  s.dispersion.drift_spline = LinearSpline<kSplineKnots>(dr, s.dispersion.plume_length);
  s.dispersion.scatter_scale = require<double>(d, "scatter_scale");
  s.dispersion.ambient_level = get_or<double>(d, "ambient_level_mol_m3", 0.0);
  s.dispersion.n_puffs = get_or<int>(d, "n_puffs", 16);
  s.dispersion.validate();

  const auto& o = j.at("optics");
  s.sigma_a_ambient = get_or<double>(o, "sigma_a_ambient_1_m", 0.0);
  s.sigma_s_ambient = require<double>(o, "sigma_s_ambient_1_m");
  s.c_dial = require<double>(o, "c_dial_m2_mol");
  s.c_ambient = get_or<double>(o, "c_ambient_1_m", 0.0);
  s.phase = detail::parse_phase(o.at("phase"));
  s.reconstruction_phase =
      o.contains("reconstruction_phase") ? detail::parse_phase(o.at("reconstruction_phase"))
                                         : s.phase;

  const auto& det = j.at("detector");
  const auto pos = require<std::vector<double>>(det, "position_m");
  s.detector.position = Vec3(pos.at(0), pos.at(1), pos.at(2));
  if (det.contains("lens_diameter_m")) {
    const double r = 0.5 * det.at("lens_diameter_m").get<double>();
    s.detector.area = M_PI * r * r;
  } else {
    s.detector.area = get_or<double>(det, "area_m2", 7.0686e-4);
  }
  s.narrow_half_angle = get_or<double>(det, "narrow_half_angle_rad", 5e-4);
  s.wide_half_angle = get_or<double>(det, "wide_half_angle_rad", 0.02);

  const auto& scan = det.at("scan");
  const auto axis = require<std::vector<double>>(scan, "center_axis");
  s.scan.center_axis = normalized(Vec3(axis.at(0), axis.at(1), axis.at(2)));
  s.detector.boresight = s.scan.center_axis;
  s.scan.n_az = get_or<int>(scan, "n_az", 30);
  s.scan.n_pol = get_or<int>(scan, "n_pol", 10);
  s.scan.az_span = get_or<double>(scan, "az_span_rad", 0.6);
  s.scan.pol_span = get_or<double>(scan, "pol_span_rad", 0.15);

  const auto& b = j.at("binning");
  s.binning.n_bins = get_or<int>(b, "n_bins", 50);
  s.binning.t_start = require<double>(b, "t_start_m");
  s.binning.dt = require<double>(b, "bin_width_m");

  const auto& a = j.at("acquisition");
  s.pulse_energy_j = get_or<double>(a, "pulse_energy_j", 250e-6);
  s.wavelength_on_nm = get_or<double>(a, "wavelength_on_nm", 1645.55);
  s.wavelength_off_nm = get_or<double>(a, "wavelength_off_nm", 1646.0);
  s.efficiency = get_or<double>(a, "efficiency", 0.04);
  s.ambient_power_w = get_or<double>(a, "ambient_power_w", 0.025);
  s.pulses_per_direction = get_or<int>(a, "pulses_per_direction", 1);

  if (j.contains("solver")) {
    const auto& sol = j.at("solver");
    s.n_paths = get_or<long>(sol, "n_paths", 20000);
    s.k_max = get_or<int>(sol, "k_max", 8);
    s.threads = get_or<int>(sol, "threads", 0);
  }
  s.seed = get_or<std::uint64_t>(j, "seed", 1);

  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    s.fit.max_iterations = get_or<int>(f, "max_iterations", 25);
    s.fit.tol = get_or<double>(f, "tol", 1e-5);
    s.fit.regularizer.width_weight = get_or<double>(f, "width_weight", 10.0);
    s.fit.regularizer.drift_weight = get_or<double>(f, "drift_weight", 10.0);
    s.fit.regularizer.scatter_center =
        get_or<double>(f, "scatter_center", s.dispersion.scatter_scale);
    s.fit.regularizer.scatter_weight = get_or<double>(f, "scatter_weight", 1e3);
    s.fit_init_release_scale = get_or<double>(f, "init_release_scale", 1.0);
  } else {
    s.fit.regularizer.scatter_center = s.dispersion.scatter_scale;
    s.fit.regularizer.scatter_weight = 1e3;
  }

  s.turbulent = get_or<bool>(j, "turbulent", false);

  if (j.contains("detect_power")) {
    const auto& p = j.at("detect_power");
    s.power_grid.sigma0 = require<std::vector<double>>(p, "sigma0");
    s.power_grid.sigma_s = require<std::vector<double>>(p, "sigma_s");
    s.power_grid.g = get_or<std::vector<double>>(p, "g", {0.0, 0.35, 0.7});
    s.power_grid.g_truth = get_or<double>(p, "g_truth", 0.0);
    s.power_grid.sigma0_bound = get_or<double>(p, "sigma0_bound", -1.0);
    s.power_grid.kernel_radius = get_or<double>(p, "kernel_radius_m", 20.0);
    s.power_grid.distance = get_or<double>(p, "distance_m", 100.0);
    s.power_grid.n_paths = get_or<long>(p, "n_paths", 30000);
    s.power_grid.k_max = get_or<int>(p, "k_max", 6);
  }
  return s;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json j;
  in >> j;
  return load_scenario(j);
}

}  // namespace plumedial
