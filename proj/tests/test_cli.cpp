#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "plumedial/io.hpp"
#include "plumedial/scenario.hpp"

using namespace plumedial;
namespace fs = std::filesystem;

namespace {

nlohmann::json minimal_scenario() {
  return nlohmann::json::parse(R"({
    "schema_version": "1.0",
    "dispersion": {
      "release_rate_mol_s": 0.6,
      "source_xy_m": [100.0, -40.0],
      "wind_m_s": [0.0, 1.4, 0.0],
      "width_spline_m": [3.0, 5.0, 7.0, 9.0, 11.0],
      "drift_spline_m": [0.5, 2.0, 3.5, 5.0, 6.5],
      "scatter_scale": 20.0
    },
    "optics": {
      "sigma_s_ambient_1_m": 1e-5,
      "c_dial_m2_mol": 8.0,
      "phase": {"type": "hg", "g": 0.5}
    },
    "detector": {
      "position_m": [0.0, 0.0, 1.5],
      "lens_diameter_m": 0.03,
      "scan": {"center_axis": [1.0, 0.15, 0.045], "n_az": 4, "n_pol": 2,
               "az_span_rad": 0.8, "pol_span_rad": 0.1}
    },
    "binning": {"n_bins": 20, "t_start_m": 180.0, "bin_width_m": 6.0},
    "acquisition": {"ambient_power_w": 0.0},
    "solver": {"n_paths": 3000, "k_max": 5},
    "seed": 7
  })");
}

}  // namespace

TEST_CASE("scenario loading validates and defaults") {
  const Scenario s = load_scenario(minimal_scenario());
  CHECK(s.dispersion.release_rate == 0.6);
  CHECK(s.detector.area == Catch::Approx(M_PI * 0.015 * 0.015));
  CHECK(s.binning.n_bins == 20);
  CHECK(s.scan.n_dir() == 8);
  CHECK(s.pulses_per_direction == 1);
  CHECK(s.efficiency == 0.04);

  SECTION("missing required fields name the field") {
    nlohmann::json bad = minimal_scenario();
    bad["optics"].erase("c_dial_m2_mol");
    try {
      load_scenario(bad);
      FAIL("expected an error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("c_dial_m2_mol") != std::string::npos);
    }
  }
  SECTION("schema major mismatch is rejected") {
    nlohmann::json bad = minimal_scenario();
    bad["schema_version"] = "2.0";
    CHECK_THROWS_AS(load_scenario(bad), std::runtime_error);
  }
  SECTION("invalid dispersion values are rejected") {
    nlohmann::json bad = minimal_scenario();
    bad["dispersion"]["width_spline_m"] = {0.0, 5.0, 7.0, 9.0, 11.0};
    CHECK_THROWS_AS(load_scenario(bad), std::invalid_argument);
  }
}

TEST_CASE("measurement CSV and metadata round-trip") {
  const Scenario s = load_scenario(minimal_scenario());
  const ScanForwardModel model = s.forward_model(FovMode::kMultiple);
  ScanForwardModel mc_model = model;
  for (auto& k : mc_model.fov_solver) k = SolverKind::kMonteCarlo;
  const ScanResponse resp = mc_model.evaluate(s.dispersion, false, s.seed);
  const AcquisitionConfig acq = s.acquisition(FovMode::kMultiple);
  const MeasurementSet data = synthesize(resp, {}, acq, s.binning, CounterRng(99));

  const fs::path dir = fs::temp_directory_path() / "plumedial_test_io";
  fs::create_directories(dir);
  write_text_file((dir / "counts.csv").string(), counts_csv(data, s.scan));
  write_text_file((dir / "meta.json").string(),
                  measurement_meta(data, s, FovMode::kMultiple, s.seed).dump(2));

  const MeasurementSet back =
      read_counts_csv((dir / "counts.csv").string(), (dir / "meta.json").string());
  REQUIRE(back.counts_on == data.counts_on);
  REQUIRE(back.counts_off == data.counts_off);
  CHECK(back.n_fov == data.n_fov);
  CHECK(back.binning.dt == data.binning.dt);
  CHECK(back.config.ambient_rate_per_fov == data.config.ambient_rate_per_fov);

  SECTION("unknown schema majors are rejected") {
    nlohmann::json meta = measurement_meta(data, s, FovMode::kMultiple, s.seed);
    meta["schema_version"] = "9.0";
    write_text_file((dir / "meta_bad.json").string(), meta.dump(2));
    CHECK_THROWS_AS(
        read_counts_csv((dir / "counts.csv").string(), (dir / "meta_bad.json").string()),
        std::runtime_error);
  }
}

TEST_CASE("scan responses are identical for any worker count") {
  const Scenario s = load_scenario(minimal_scenario());
  ScanForwardModel model = s.forward_model(FovMode::kWide);
  for (auto& k : model.fov_solver) k = SolverKind::kMonteCarlo;
  model.solver.n_threads = 1;
  const ScanResponse a = model.evaluate(s.dispersion, true, 31);
  model.solver.n_threads = 4;
  const ScanResponse b = model.evaluate(s.dispersion, true, 31);
  model.solver.n_threads = 8;
  const ScanResponse c = model.evaluate(s.dispersion, true, 31);
  REQUIRE(a.on == b.on);
  REQUIRE(a.off == c.off);
  REQUIRE(a.grad_on == b.grad_on);

  // Byte-level stability of the serialised artefacts.
  const AcquisitionConfig acq = s.acquisition(FovMode::kWide);
  const MeasurementSet da = synthesize(a, {}, acq, s.binning, CounterRng(5));
  const MeasurementSet db = synthesize(b, {}, acq, s.binning, CounterRng(5));
  REQUIRE(counts_csv(da, s.scan) == counts_csv(db, s.scan));
  REQUIRE(response_csv(a, s.scan, s.binning) == response_csv(b, s.scan, s.binning));
}

TEST_CASE("fit result JSON carries the named fields") {
  FitResult res;
  res.params.release_rate = 0.61;
  res.params.source = Vec3(101.0, -39.0, 0.0);
  res.converged = true;
  res.loss_trace = {10.0, 9.0, 8.5};
  res.covariance = Matrix::identity(ThetaLayout::kDim);
  const nlohmann::json j = fit_result_json(res);
  CHECK(j.at("theta").at("release_rate") == 0.61);
  CHECK(j.at("covariance_row_major").size() == 196);
  CHECK(j.at("loss_trace").size() == 3);
  check_schema(j.at("schema_version").get<std::string>(), "fit result");
}

TEST_CASE("error table and phi map CSV formats") {
  const std::string table = error_table_csv({{"wide", false, "3", true, 0.21, 0.08},
                                             {"wide", false, "mean", true, 0.2, 0.07}});
  CHECK(table.find("fov_mode,turbulence,seed,converged,l1_rel,release_rel") == 0);
  CHECK(table.find("wide,no,mean,1,") != std::string::npos);

  const std::string map = phi_map_csv({{0.5, 1.5, 0.0, -0.25}});
  CHECK(map.find("sigma0,sigma_s,g,phi") == 0);
  CHECK(map.find("0.5,1.5,0,-0.25") != std::string::npos);
}
