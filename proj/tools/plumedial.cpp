// Batch driver: scenario in, CSV/JSON/SVG artefacts out. Subcommands cover
// measurement synthesis, semi-parametric reconstruction, detection-power
// maps and the turbulence perturbation demo.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "plumedial/io.hpp"
#include "plumedial/power_map.hpp"
#include "plumedial/scenario.hpp"
#include "plumedial/svg.hpp"
#include "plumedial/turbulence.hpp"

namespace fs = std::filesystem;
using namespace plumedial;

namespace {

struct CommonArgs {
  std::string scenario_path;
  std::string out_dir;
  std::uint64_t seed = 0;  // 0: use the scenario's seed
  int threads = 0;
  std::string fov = "narrow";
};

Scenario load_with_overrides(const CommonArgs& args) {
  Scenario s = load_scenario_file(args.scenario_path);
  if (args.seed != 0) s.seed = args.seed;
  if (args.threads != 0) s.threads = args.threads;
  return s;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir);
}

// The synthesized data always comes from the full transport solver; the
// analytic short cut is a reconstruction-side approximation.
ScanForwardModel truth_model(const Scenario& s, FovMode mode) {
  ScanForwardModel m = s.forward_model(mode);
  for (auto& k : m.fov_solver) k = SolverKind::kMonteCarlo;
  return m;
}

int run_simulate(const CommonArgs& args) {
  const Scenario s = load_with_overrides(args);
  const FovMode mode = fov_mode_from_string(args.fov);
  ensure_out_dir(args.out_dir);

  ScanForwardModel model = truth_model(s, mode);
  ScanResponse response;
  if (s.turbulent) {
    // Freeze one turbulent realisation of the plume as the scene.
    const KernelField field = perturb(s.dispersion, s.turbulence,
                                      CounterRng(CounterRng::mix(s.seed ^ 0x7072b1ull)));
    OpticalScene scene;
    scene.sigma_a_ambient = model.sigma_a_ambient;
    scene.sigma_s_ambient = model.sigma_s_ambient;
    scene.c_dial = model.c_dial;
    scene.c_ambient = model.c_ambient;
    scene.scatter_scale = s.dispersion.scatter_scale;
    scene.plume.field = field;
    scene.phase = model.phase;

    const int n_fov = static_cast<int>(model.detector.fov_apertures.size());
    response.n_fov = n_fov;
    response.n_dir = model.grid.n_dir();
    response.n_bins = model.binning.n_bins;
    response.on.assign(static_cast<std::size_t>(n_fov) * response.n_dir * response.n_bins, 0.0);
    response.off.assign(response.on.size(), 0.0);
    const CounterRng master(CounterRng::mix(s.seed ^ 0x9d5c1c5a7bd9ull));
    TraceConfig cfg = model.solver;
    cfg.n_threads = 1;
    parallel_for(response.n_dir, s.threads, [&](int d) {
      const DirectionalResponse r = trace_response(
          scene, model.detector, model.grid.direction(d), model.binning, cfg, master.child(d));
      for (int f = 0; f < n_fov; ++f)
        for (int b = 0; b < response.n_bins; ++b) {
          response.on[response.idx(f, d, b)] = r.on[r.idx(f, b)];
          response.off[response.idx(f, d, b)] = r.off[r.idx(f, b)];
        }
    });
  } else {
    response = model.evaluate(s.dispersion, false, s.seed);
  }

  const AcquisitionConfig acq = s.acquisition(mode);
  const MeasurementSet data =
      synthesize(response, {}, acq, s.binning, CounterRng(CounterRng::mix(s.seed ^ 0xc0117ull)));

  write_text_file(args.out_dir + "/counts.csv", counts_csv(data, s.scan));
  write_text_file(args.out_dir + "/response.csv", response_csv(response, s.scan, s.binning));
  nlohmann::json meta = measurement_meta(data, s, mode, s.seed);
  meta["turbulent"] = s.turbulent;
  meta["cost_model_flops"] =
      cost_model(s.n_paths, s.binning.n_bins, s.k_max,
                 static_cast<int>(discretize_release(s.dispersion, s.dispersion.n_puffs)
                                      .kernels.size())) *
      s.scan.n_az * s.scan.n_pol;
  write_text_file(args.out_dir + "/meta.json", meta.dump(2) + "\n");
  std::cout << "simulate: wrote " << args.out_dir << "/counts.csv ("
            << data.n_fov * data.n_dir * data.n_bins << " bins)\n";
  return 0;
}

DispersionParams initial_guess(const Scenario& s, const ScanForwardModel& model,
                               const MeasurementSet& data) {
  DispersionParams nominal = s.dispersion;
  nominal.release_rate *= s.fit_init_release_scale;
  return coarse_source_screen(model, data, nominal, s.fit.regularizer);
}

int run_reconstruct(const CommonArgs& args, const std::vector<std::string>& data_dirs) {
  const Scenario s = load_with_overrides(args);
  const FovMode mode = fov_mode_from_string(args.fov);
  ensure_out_dir(args.out_dir);

  std::vector<ErrorTableRow> rows;
  double sum_l1 = 0.0, sum_release = 0.0;
  int n_ok = 0;

  for (std::size_t run = 0; run < data_dirs.size(); ++run) {
    const std::string& dir = data_dirs[run];
    const MeasurementSet data = read_counts_csv(dir + "/counts.csv", dir + "/meta.json");
    std::ifstream meta_in(dir + "/meta.json");
    nlohmann::json meta;
    meta_in >> meta;
    const std::uint64_t data_seed = meta.at("seed").get<std::uint64_t>();
    const bool turbulent = meta.value("turbulent", false);

    ScanForwardModel model = s.forward_model(mode, /*for_reconstruction=*/true);
    FitConfig fit_cfg = s.fit;
    fit_cfg.seed = data_seed ^ 0xf17;

    const DispersionParams start = initial_guess(s, model, data);
    const FitResult res = fit(model, data, start, fit_cfg);
    const ErrorMetrics err = error_metrics(res.params, s.dispersion);

    nlohmann::json fit_json = fit_result_json(res);
    fit_json["data_seed"] = data_seed;
    fit_json["fov_mode"] = to_string(mode);
    fit_json["init"] = {{"release_rate", start.release_rate},
                        {"source_x", start.source.x},
                        {"source_y", start.source.y}};
    fit_json["errors"] = {{"l1_rel", err.l1_rel}, {"release_rel", err.release_rel}};
    write_text_file(args.out_dir + "/fit_" + to_string(mode) + "_seed" +
                        std::to_string(data_seed) + ".json",
                    fit_json.dump(2) + "\n");

    rows.push_back({to_string(mode), turbulent, std::to_string(data_seed), res.converged,
                    err.l1_rel, err.release_rel});
    sum_l1 += err.l1_rel;
    sum_release += err.release_rel;
    ++n_ok;

    std::cout << "reconstruct[" << dir << "]: converged=" << res.converged
              << " l1=" << err.l1_rel << " release=" << err.release_rel << "\n";
  }

  if (n_ok > 0) {
    const bool any_turb = !rows.empty() && rows.front().turbulent;
    rows.push_back({to_string(mode), any_turb, "mean", true, sum_l1 / n_ok, sum_release / n_ok});
  }
  write_text_file(args.out_dir + "/errors_" + to_string(mode) + ".csv", error_table_csv(rows));
  return 0;
}

int run_detect_power(const CommonArgs& args) {
  const Scenario s = load_with_overrides(args);
  ensure_out_dir(args.out_dir);
  if (s.power_grid.sigma0.empty() || s.power_grid.sigma_s.empty())
    throw std::runtime_error("detect-power: scenario lacks a detect_power grid");

  const PowerMapContext ctx = PowerMapContext::make(s);
  const auto table = tabulate_power_grid(ctx, s.power_grid, s.seed);

  const PhiMaps unconstrained = phi_map(ctx, s.power_grid, table, -1.0);
  const double bound = s.power_grid.sigma0_bound > 0.0 ? s.power_grid.sigma0_bound : 2.0;
  const PhiMaps constrained = phi_map(ctx, s.power_grid, table, bound);

  write_text_file(args.out_dir + "/phi_map_unconstrained.csv", phi_map_csv(unconstrained.rows));
  write_text_file(args.out_dir + "/phi_map_constrained.csv", phi_map_csv(constrained.rows));

  const auto to_cellmap = [&](const PhiMaps& maps, const std::string& title) {
    svg::CellMap cm;
    cm.xs = s.power_grid.sigma0;
    cm.ys = s.power_grid.sigma_s;
    cm.values.assign(cm.xs.size() * cm.ys.size(), 0.0);
    for (const PhiMapRow& r : maps.rows) {
      const auto ix = std::find(cm.xs.begin(), cm.xs.end(), r.sigma0) - cm.xs.begin();
      const auto iy = std::find(cm.ys.begin(), cm.ys.end(), r.sigma_s) - cm.ys.begin();
      cm.values[static_cast<std::size_t>(iy) * cm.xs.size() + ix] = r.phi;
    }
    cm.x_label = "ambient optical depth";
    cm.y_label = "plume optical thickness";
    cm.title = title;
    return cm;
  };
  write_text_file(args.out_dir + "/phi_map_unconstrained.svg",
                  svg::render_cell_map(to_cellmap(unconstrained, "phi, unconstrained nuisance")));
  write_text_file(args.out_dir + "/phi_map_constrained.svg",
                  svg::render_cell_map(to_cellmap(constrained, "phi, bounded ambient scattering")));

  int positive = 0;
  for (const PhiMapRow& r : unconstrained.rows) positive += r.phi > 0.0 ? 1 : 0;
  std::cout << "detect-power: " << unconstrained.rows.size() << " truth points, " << positive
            << " with phi > 0 (unconstrained)\n";
  return 0;
}

int run_turbulence_demo(const CommonArgs& args, int n_draws) {
  const Scenario s = load_with_overrides(args);
  ensure_out_dir(args.out_dir);

  const KernelField smooth = discretize_release(s.dispersion, s.dispersion.n_puffs);
  FieldGrid grid = FieldGrid::covering(smooth, 4.0);
  grid.nx = 40;
  grid.ny = 56;
  grid.nz = 28;

  std::ostringstream csv;
  csv << "seed,l1_divergence\n";
  std::vector<double> divs;
  for (int d = 0; d < n_draws; ++d) {
    const std::uint64_t seed = s.seed + d;
    const KernelField drawn =
        perturb(s.dispersion, s.turbulence, CounterRng(CounterRng::mix(seed)));
    const double div = l1_divergence(drawn, smooth, grid);
    divs.push_back(div);
    csv << seed << ',' << format_double(div) << '\n';
  }
  write_text_file(args.out_dir + "/turbulence_l1.csv", csv.str());

  svg::LineChart chart;
  chart.title = "single-draw L1 divergence from the smooth plume";
  chart.x_label = "draw";
  chart.y_label = "relative L1";
  chart.series = {divs};
  chart.names = {"draws"};
  write_text_file(args.out_dir + "/turbulence_l1.svg", svg::render_line_chart(chart));

  const double mean = std::accumulate(divs.begin(), divs.end(), 0.0) / divs.size();
  std::cout << "turbulence-demo: " << n_draws << " draws, mean L1 divergence " << mean << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plumedial: wide-FOV differential-absorption lidar toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<std::string> data_dirs;
  int demo_draws = 20;

  const auto add_common = [&](CLI::App* cmd, bool with_fov = true) {
    cmd->add_option("--scenario", args.scenario_path, "scenario JSON file")->required();
    cmd->add_option("--seed", args.seed, "override the scenario seed");
    cmd->add_option("--out", args.out_dir, "output directory")->required();
    cmd->add_option("--threads", args.threads, "worker cap (default: PLUMEDIAL_THREADS or all)");
    if (with_fov)
      cmd->add_option("--fov", args.fov, "narrow|wide|multiple")
          ->check(CLI::IsMember({"narrow", "wide", "multiple"}));
  };

  CLI::App* sim = app.add_subcommand("simulate", "synthesize photon counts for a scenario");
  add_common(sim);
  CLI::App* rec = app.add_subcommand("reconstruct", "fit dispersion parameters to counts");
  add_common(rec);
  rec->add_option("--data", data_dirs, "one or more simulate output directories")
      ->required()
      ->delimiter(',');
  CLI::App* pow = app.add_subcommand("detect-power", "narrow-vs-wide detection power maps");
  add_common(pow, false);
  CLI::App* turb = app.add_subcommand("turbulence-demo", "draws of the perturbed plume");
  add_common(turb, false);
  turb->add_option("--draws", demo_draws, "number of perturbation draws");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(args);
    if (rec->parsed()) return run_reconstruct(args, data_dirs);
    if (pow->parsed()) return run_detect_power(args);
    if (turb->parsed()) return run_turbulence_demo(args, demo_draws);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
