#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "plumedial/forward.hpp"
#include "plumedial/inverse.hpp"
#include "plumedial/measurement.hpp"
#include "plumedial/scenario.hpp"

namespace plumedial {

// Round-trip-exact decimal formatting; shared by every writer so outputs are
// byte-stable.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// ---- counts CSV ------------------------------------------------------------

inline std::string counts_csv(const MeasurementSet& data, const ScanGrid& grid) {
  std::ostringstream out;
  out << "fov,dir_az,dir_pol,bin,t_mid,count_on,count_off\n";
  for (int f = 0; f < data.n_fov; ++f)
    for (int d = 0; d < data.n_dir; ++d)
      for (int b = 0; b < data.n_bins; ++b) {
        out << f << ',' << format_double(grid.azimuth(d)) << ',' << format_double(grid.polar(d))
            << ',' << b << ',' << format_double(data.binning.mid(b)) << ','
            << data.counts_on[data.idx(f, d, b)] << ',' << data.counts_off[data.idx(f, d, b)]
            << '\n';
      }
  return out.str();
}

inline nlohmann::json measurement_meta(const MeasurementSet& data, const Scenario& scenario,
                                       FovMode mode, std::uint64_t seed) {
  nlohmann::json j;
  j["schema_version"] = schema_version();
  j["fov_mode"] = to_string(mode);
  j["seed"] = seed;
  j["n_fov"] = data.n_fov;
  j["n_dir"] = data.n_dir;
  j["n_bins"] = data.n_bins;
  j["binning"] = {{"n_bins", data.binning.n_bins},
                  {"t_start_m", data.binning.t_start},
                  {"bin_width_m", data.binning.dt}};
  j["acquisition"] = {{"pulse_photons", data.config.pulse_photons},
                      {"efficiency", data.config.efficiency},
                      {"detector_area_m2", data.config.detector_area},
                      {"pulses_per_direction", data.config.pulses_per_direction},
                      {"wavelength_on_m", data.config.wavelength_on_m},
                      {"wavelength_off_m", data.config.wavelength_off_m},
                      {"ambient_rate_per_fov", data.config.ambient_rate_per_fov}};
  j["scan"] = {{"n_az", scenario.scan.n_az},
               {"n_pol", scenario.scan.n_pol},
               {"az_span_rad", scenario.scan.az_span},
               {"pol_span_rad", scenario.scan.pol_span},
               {"center_axis",
                {scenario.scan.center_axis.x, scenario.scan.center_axis.y,
                 scenario.scan.center_axis.z}}};
  return j;
}

// Reads counts written by counts_csv back into a MeasurementSet; the
// metadata sidecar restores shapes and acquisition constants.
inline MeasurementSet read_counts_csv(const std::string& csv_path, const std::string& meta_path) {
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw std::runtime_error("cannot open " + meta_path);
  nlohmann::json meta;
  meta_in >> meta;
  check_schema(meta.at("schema_version").get<std::string>(), "measurement metadata");

  MeasurementSet out;
  out.n_fov = meta.at("n_fov").get<int>();
  out.n_dir = meta.at("n_dir").get<int>();
  out.n_bins = meta.at("n_bins").get<int>();
  const auto& b = meta.at("binning");
  out.binning = TimeBinning{b.at("n_bins").get<int>(), b.at("t_start_m").get<double>(),
                            b.at("bin_width_m").get<double>()};
  const auto& a = meta.at("acquisition");
  out.config.pulse_photons = a.at("pulse_photons").get<double>();
  out.config.efficiency = a.at("efficiency").get<double>();
  out.config.detector_area = a.at("detector_area_m2").get<double>();
  out.config.pulses_per_direction = a.at("pulses_per_direction").get<int>();
  out.config.wavelength_on_m = a.at("wavelength_on_m").get<double>();
  out.config.wavelength_off_m = a.at("wavelength_off_m").get<double>();
  out.config.ambient_rate_per_fov = a.at("ambient_rate_per_fov").get<std::vector<double>>();

  out.counts_on.assign(out.size(), 0);
  out.counts_off.assign(out.size(), 0);

  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path);
  std::string line;
  std::getline(in, line);
  if (line != "fov,dir_az,dir_pol,bin,t_mid,count_on,count_off")
    throw std::runtime_error("unexpected counts CSV header in " + csv_path);
  // Rows are emitted in (fov, dir, bin) nested order; the row position is
  // the flat index. The fov and bin columns double as a consistency check.
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= out.size()) throw std::runtime_error("counts CSV has too many rows");
    std::istringstream ls(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ls, tok, ',')) cols.push_back(tok);
    if (cols.size() != 7) throw std::runtime_error("bad counts CSV row: " + line);
    const int f = std::stoi(cols[0]);
    const int bin = std::stoi(cols[3]);
    const std::size_t expect_f = row / (static_cast<std::size_t>(out.n_dir) * out.n_bins);
    const std::size_t expect_bin = row % out.n_bins;
    if (f != static_cast<int>(expect_f) || bin != static_cast<int>(expect_bin))
      throw std::runtime_error("counts CSV rows out of order at line " + std::to_string(row + 2));
    out.counts_on[row] = std::stol(cols[5]);
    out.counts_off[row] = std::stol(cols[6]);
    ++row;
  }
  if (row != out.size()) throw std::runtime_error("counts CSV row count mismatch");
  return out;
}

// ---- response CSV ----------------------------------------------------------

inline std::string response_csv(const ScanResponse& r, const ScanGrid& grid,
                                const TimeBinning& binning) {
  std::ostringstream out;
  out << "fov,dir_az,dir_pol,bin,t_mid,m_on,m_off\n";
  for (int f = 0; f < r.n_fov; ++f)
    for (int d = 0; d < r.n_dir; ++d)
      for (int b = 0; b < r.n_bins; ++b)
        out << f << ',' << format_double(grid.azimuth(d)) << ',' << format_double(grid.polar(d))
            << ',' << b << ',' << format_double(binning.mid(b)) << ','
            << format_double(r.on[r.idx(f, d, b)]) << ',' << format_double(r.off[r.idx(f, d, b)])
            << '\n';
  return out.str();
}

// ---- fit result JSON -------------------------------------------------------

inline nlohmann::json fit_result_json(const FitResult& res) {
  nlohmann::json j;
  j["schema_version"] = schema_version();
  j["converged"] = res.converged;
  j["iterations"] = res.iterations;
  j["seed"] = res.seed;
  j["loss_trace"] = res.loss_trace;
  nlohmann::json theta;
  theta["release_rate"] = res.params.release_rate;
  theta["source_x"] = res.params.source.x;
  theta["source_y"] = res.params.source.y;
  theta["width_spline"] = res.params.width_spline.knots();
  theta["drift_spline"] = res.params.drift_spline.knots();
  theta["scatter_scale"] = res.params.scatter_scale;
  j["theta"] = theta;
  std::vector<double> cov;
  cov.reserve(static_cast<std::size_t>(ThetaLayout::kDim) * ThetaLayout::kDim);
  for (int i = 0; i < ThetaLayout::kDim; ++i)
    for (int c = 0; c < ThetaLayout::kDim; ++c) cov.push_back(res.covariance(i, c));
  j["covariance_row_major"] = cov;
  return j;
}

// ---- error table CSV -------------------------------------------------------

struct ErrorTableRow {
  std::string fov_mode;
  bool turbulent = false;
  std::string seed;  // number or "mean"
  bool converged = true;
  double l1_rel = 0.0;
  double release_rel = 0.0;
};

inline std::string error_table_csv(const std::vector<ErrorTableRow>& rows) {
  std::ostringstream out;
  out << "fov_mode,turbulence,seed,converged,l1_rel,release_rel\n";
  for (const ErrorTableRow& r : rows)
    out << r.fov_mode << ',' << (r.turbulent ? "yes" : "no") << ',' << r.seed << ','
        << (r.converged ? 1 : 0) << ',' << format_double(r.l1_rel) << ','
        << format_double(r.release_rel) << '\n';
  return out.str();
}

// ---- phi map CSV -----------------------------------------------------------

struct PhiMapRow {
  double sigma0 = 0.0;
  double sigma_s = 0.0;
  double g = 0.0;
  double phi = 0.0;
};

inline std::string phi_map_csv(const std::vector<PhiMapRow>& rows) {
  std::ostringstream out;
  out << "sigma0,sigma_s,g,phi\n";
  for (const PhiMapRow& r : rows)
    out << format_double(r.sigma0) << ',' << format_double(r.sigma_s) << ','
        << format_double(r.g) << ',' << format_double(r.phi) << '\n';
  return out.str();
}

}  // namespace plumedial
