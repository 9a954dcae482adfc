// pumpsim: batch driver for the optical pumping, Raman spectrum, heating and
// alpha-fit workflows. Exit codes: 0 ok, 2 config error, 3 data error,
// 4 non-convergence.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "pumpsim/atomic_structure.hpp"
#include "pumpsim/config.hpp"
#include "pumpsim/error.hpp"
#include "pumpsim/fitting.hpp"
#include "pumpsim/heating.hpp"
#include "pumpsim/kinetics.hpp"
#include "pumpsim/raman.hpp"

namespace fs = std::filesystem;
using namespace pumpsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNoConvergence = 4;

// Reference values quoted by the experiment, printed next to simulated ones.
constexpr double kMeasuredFwhmTau = 1.12;
constexpr double kMeasuredPolarizedFwhmHz = 160.0;
constexpr double kMeasuredUnpolarizedFwhmHz = 3500.0;
constexpr double kMeasuredDeltaVrms = 1.1;

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::vector<std::string> data;
  bool prune = false;
};

class Report {
 public:
  void add(const std::string& key, double value) {
    std::ostringstream os;
    os << std::setprecision(10) << value;
    entries_.emplace_back(key, os.str());
  }
  void add(const std::string& key, std::string value) { entries_.emplace_back(key, std::move(value)); }
  void add(const std::string& key, bool value) { entries_.emplace_back(key, value ? "true" : "false"); }
  void add(const std::string& key, std::size_t value) { entries_.emplace_back(key, std::to_string(value)); }
  void add(const std::string& key, const std::optional<double>& value) {
    if (value) {
      add(key, *value);
    } else {
      entries_.emplace_back(key, "not_reached");
    }
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  void print(std::ostream& os) const {
    for (const auto& [k, v] : entries_) os << k << '=' << v << '\n';
  }
  void write_comments(std::ostream& os) const {
    for (const auto& [k, v] : entries_) os << "# " << k << '=' << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Writes to a sibling temporary and renames it over `path`.
template <typename Writer>
void write_atomically(const fs::path& path, Writer writer) {
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

ScenarioConfig load(const Options& opt) {
  ScenarioConfig config = opt.config.empty() ? ScenarioConfig{} : load_config(opt.config);
  if (opt.out) config.directory = *opt.out;
  if (opt.seed) config.seed = *opt.seed;
  if (opt.threads) config.threads = *opt.threads;
  return config;
}

RateMatrix build_matrix(const ScenarioConfig& config, bool prune_terms, std::size_t* active = nullptr) {
  const auto beams = config.beam_specs();
  RateMatrix matrix = assemble_rate_matrix(beams);
  if (prune_terms) {
    PruneResult pruned = prune(matrix, kDefaultPruneThreshold);
    if (active) *active = pruned.active_count;
    return std::move(pruned.matrix);
  }
  return matrix;
}

double step_seconds(const ScenarioConfig& config) { return config.dt_gamma / constants::gamma; }

ObservationSeries fraction_series(const PopulationTrajectory& trajectory, const SublevelLabel& label) {
  ObservationSeries series;
  series.sublevel = label;
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    series.times.push_back(trajectory.times[i]);
    series.fractions.push_back(ground_fraction(trajectory.populations[i], label));
  }
  return series;
}

int cmd_states(const Options& opt) {
  const auto states = enumerate_states();
  std::ostringstream table;
  table << "index, label\n";
  for (std::size_t i = 0; i < states.size(); ++i) table << i << ", " << states[i].name() << '\n';
  std::cout << table.str();
  std::cout << "# states=" << states.size() << '\n';

  std::optional<ScenarioConfig> config;
  if (!opt.config.empty() || opt.out) config = load(opt);
  if (opt.prune) {
    if (!config || config->beams.empty()) throw ConfigError("--prune needs a config with [beams.*] sections");
    std::size_t active = 0;
    build_matrix(*config, true, &active);
    std::cout << "# prune_threshold=" << kDefaultPruneThreshold << '\n' << "# active=" << active << '\n';
  }
  if (opt.out) {
    write_atomically(config->directory / "states.csv", [&](std::ostream& os) { os << table.str(); });
    write_atomically(config->directory / "branching.csv",
                     [](std::ostream& os) { BranchingTable::instance().write_csv(os); });
  }
  return kExitOk;
}

int cmd_pump(const Options& opt) {
  const ScenarioConfig config = load(opt);
  std::size_t active = kNumStates;
  const RateMatrix matrix = build_matrix(config, opt.prune, &active);
  IntegrationOptions io;
  io.max_samples = config.max_samples;
  const PopulationTrajectory trajectory =
      integrate_rk4(matrix, config.initial_populations(), step_seconds(config), config.t_end_s, io);
  const PumpMetrics metrics = pump_metrics(trajectory);

  Report report;
  report.add("t_end_s", trajectory.times.back());
  report.add("dt_gamma", config.dt_gamma);
  report.add("pruned", opt.prune);
  if (opt.prune) report.add("active_sublevels", active);
  report.add("m0_fraction_final", metrics.m0_fraction.back());
  report.add("m1_fraction_final", ground_fraction(trajectory.populations.back(), SublevelLabel::ground(4, 1)));
  report.add("tau_50_s", metrics.tau_50);
  report.add("photons_to_tau50", metrics.photons_to_tau50);
  report.add("photons_total", trajectory.scattered_photons.back());
  report.add("clipped_entries", trajectory.clipped_entries);

  const fs::path dir = config.directory;
  write_atomically(dir / "trajectory.csv", [&](std::ostream& os) { trajectory.write_csv(os); });
  write_atomically(dir / "metrics.txt", [&](std::ostream& os) { report.write_comments(os); });
  write_atomically(dir / "m0_fraction.csv", [&](std::ostream& os) {
    write_observations(os, fraction_series(trajectory, SublevelLabel::ground(4, 0)));
  });
  write_atomically(dir / "m1_fraction.csv", [&](std::ostream& os) {
    write_observations(os, fraction_series(trajectory, SublevelLabel::ground(4, 1)));
  });
  report.print(std::cout);
  return kExitOk;
}

std::vector<double> spectrum_populations(const ScenarioConfig& config, bool prune_terms) {
  Populations n;
  switch (config.populations) {
    case SpectrumPopulations::dark:
      n = single_sublevel_populations(SublevelLabel::ground(4, 0));
      break;
    case SpectrumPopulations::uniform_f4:
      n = uniform_f4_populations();
      break;
    case SpectrumPopulations::pumped: {
      const RateMatrix matrix = build_matrix(config, prune_terms);
      const double t = config.t_end_s;
      n = populations_at(matrix, config.initial_populations(), step_seconds(config), std::span(&t, 1)).front();
      break;
    }
  }
  return {n.data(), n.data() + n.size()};
}

int cmd_spectrum(const Options& opt) {
  const ScenarioConfig config = load(opt);
  const RamanPulse pulse = config.pulse();
  const bool counter = pulse.geometry == Geometry::counterpropagating;
  const auto grid = detuning_grid(config.half_span_hz.value_or(counter ? 250e3 : 2e3),
                                  config.step_hz.value_or(counter ? 250.0 : 1.0));
  const auto pops = spectrum_populations(config, opt.prune);

  Report report;
  report.add("geometry", to_string(pulse.geometry));
  report.add("tau_s", pulse.duration);
  report.add("rabi_rad_s", pulse.rabi_frequency);
  int status = kExitOk;
  Spectrum spectrum;
  if (!counter) {
    CopropagatingOptions co;
    co.field_rms_gauss = config.rms_fluct_gauss;
    spectrum = synth_copropagating(pops, config.zeeman(), pulse, grid, co);
    const double fwhm = measure_fwhm(spectrum);
    const auto res = velocity_resolution(fwhm);
    const auto res_ref = velocity_resolution(kMeasuredPolarizedFwhmHz);
    report.add("fwhm_hz", fwhm);
    report.add("fwhm_times_tau", fwhm * pulse.duration);
    report.add("fwhm_times_tau_lineshape", rabi_fwhm(pulse) * pulse.duration);
    report.add("fwhm_times_tau_measured", kMeasuredFwhmTau);
    report.add("velocity_resolution_vr", res.vr);
    report.add("velocity_resolution_um_per_s", res.m_per_s * 1e6);
    report.add("measured_fwhm_hz", kMeasuredPolarizedFwhmHz);
    report.add("measured_resolution_vr", res_ref.vr);
    report.add("measured_resolution_inverse", 1.0 / res_ref.vr);
    report.add("measured_resolution_um_per_s", res_ref.m_per_s * 1e6);
    report.add("improvement_factor_unpolarized_over_polarized",
               kMeasuredUnpolarizedFwhmHz / kMeasuredPolarizedFwhmHz);
  } else {
    spectrum = synth_counterpropagating(pops, {config.sigma_vr, config.mean_vr}, pulse, grid, config.zeeman());
    const GaussianFit fit = fit_gaussian(spectrum);
    report.add("sigma_vr_input", config.sigma_vr);
    report.add("fwhm_hz", measure_fwhm(spectrum));
    report.add("fit_center_hz", fit.center_hz);
    report.add("fit_sigma_hz", fit.sigma_hz);
    report.add("fit_fwhm_hz", 2.0 * std::sqrt(2.0 * std::log(2.0)) * fit.sigma_hz);
    report.add("fit_amplitude", fit.amplitude);
    report.add("fit_rms_residual", fit.rms_residual);
    report.add("fit_iterations", static_cast<std::size_t>(fit.iterations));
    report.add("fit_converged", fit.converged);
    report.add("v_rms_vr", fit.sigma_vr);
    report.add("v_rms_um_per_s", fit.sigma_m_per_s * 1e6);
    report.add("temperature_uk", fit.temperature_uk);
    if (!fit.converged) status = kExitNoConvergence;
  }
  write_atomically(fs::path(config.directory) / "spectrum.csv",
                   [&](std::ostream& os) { spectrum.write_csv(os, report.entries()); });
  report.print(std::cout);
  return status;
}

int cmd_heat(const Options& opt) {
  const ScenarioConfig config = load(opt);
  if (config.beams.empty()) throw ConfigError("heat needs at least one [beams.*] section");
  const double alpha = config.common_alpha();
  auto beams = config.beam_specs();
  CycleOptions co;
  co.threshold = config.threshold;
  co.t_end = config.t_end_s;
  co.step_gamma = config.dt_gamma;
  co.prune = opt.prune;
  WalkOptions wo;
  wo.samples = config.samples;
  wo.seed = config.seed;
  wo.absorption = config.absorption;
  wo.threads = config.threads;
  const HeatingSummary summary = heating_summary(config.sigma_vr, beams, alpha, config.recoil, co, wo);

  Report report;
  report.add("alpha", alpha);
  report.add("threshold", co.threshold);
  bool all_reached = true;
  for (int m = -4; m <= 4; ++m) {
    const auto k = static_cast<std::size_t>(m + 4);
    report.add("cycles_m" + std::to_string(m), summary.cycles.per_sublevel[k]);
    all_reached = all_reached && summary.cycles.reached[k];
  }
  report.add("cycles_sublevel_average", summary.cycles.sublevel_average);
  report.add("cycles_uniform_start", summary.cycles.uniform);
  report.add("threshold_reached", all_reached && summary.cycles.uniform_reached);
  report.add("samples", summary.walk.samples);
  report.add("seed", std::to_string(summary.walk.seed));
  report.add("mean_cycles", summary.walk.mean_cycles);
  report.add("delta_vrms_vr", summary.delta_vrms);
  report.add("delta_vrms_standard_error_vr", summary.walk.standard_error);
  report.add("delta_vrms_measured_vr", kMeasuredDeltaVrms);
  report.add("initial_vrms_vr", summary.initial_vrms);
  report.add("final_vrms_quadrature_vr", summary.final_vrms_quadrature);
  report.add("final_vrms_additive_vr", summary.final_vrms_additive);

  write_atomically(fs::path(config.directory) / "heating.csv", [&](std::ostream& os) {
    report.write_comments(os);
    write_histogram(os, summary.walk);
  });
  report.print(std::cout);
  return all_reached && summary.cycles.uniform_reached ? kExitOk : kExitNoConvergence;
}

int cmd_fit(const Options& opt) {
  const ScenarioConfig config = load(opt);
  if (config.beams.empty()) throw ConfigError("fit needs at least one [beams.*] section");
  std::vector<fs::path> files = config.data;
  for (const auto& d : opt.data) files.emplace_back(d);
  if (files.empty()) throw ConfigError("[fit] data: no observation files given");
  std::vector<ObservationSeries> series;
  for (const auto& f : files) {
    series.push_back(read_observation_file(f));
    series.back().fit_amplitude = config.fit_amplitude;
  }

  FitOptions fo;
  fo.alpha_max = config.alpha_max;
  fo.max_iterations = config.max_iterations;
  fo.step_gamma = config.dt_gamma;
  fo.prune = opt.prune;
  fo.initial = config.initial_populations();
  const auto beams = config.beam_specs();
  const FitResult result = fit_alpha(series, beams, fo);
  const ResidualReport residuals = residual_report(series, beams, result.alpha_hat, fo);

  Report report;
  report.add("alpha_hat", result.alpha_hat);
  report.add("alpha_tolerance", fo.tolerance());
  report.add("sse", result.sse);
  report.add("iterations", static_cast<std::size_t>(result.iterations));
  report.add("converged", result.converged);
  report.add("weakly_identified", result.weakly_identified);
  for (std::size_t k = 0; k < series.size(); ++k) {
    report.add("series" + std::to_string(k) + "_file", files[k].string());
    report.add("series" + std::to_string(k) + "_sublevel", series[k].sublevel.name());
    report.add("series" + std::to_string(k) + "_amplitude", result.amplitudes[k]);
  }

  write_atomically(fs::path(config.directory) / "fit.csv", [&](std::ostream& os) {
    report.write_comments(os);
    os << "series, sublevel, time_s, observed_fraction, residual\n" << std::setprecision(17);
    for (std::size_t k = 0; k < series.size(); ++k) {
      for (std::size_t i = 0; i < series[k].times.size(); ++i) {
        os << k << ", " << series[k].sublevel.name() << ", " << series[k].times[i] << ", "
           << series[k].fractions[i] << ", " << residuals.residuals[k][i] << '\n';
      }
    }
  });
  report.print(std::cout);
  return result.converged ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optical pumping, Raman velocimetry and heating simulator"};
  app.require_subcommand(1);
  Options opt;

  const auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", opt.config, "Scenario file (INI)")->check(CLI::ExistingFile);
    if (config_required) c->required();
    sub->add_option("--out", opt.out, "Output directory (overrides [output] directory)");
    sub->add_option("--seed", opt.seed, "Monte Carlo seed (overrides [mc] seed)");
    sub->add_option("--threads", opt.threads, "Worker threads (overrides [mc] threads)")
        ->check(CLI::Range(1U, 1024U));
    sub->add_flag("--prune", opt.prune, "Drop weak stimulated couplings");
  };

  auto* states = app.add_subcommand("states", "List the sublevel basis");
  add_common(states, false);
  auto* pump = app.add_subcommand("pump", "Integrate the pumping dynamics");
  add_common(pump, true);
  auto* spectrum = app.add_subcommand("spectrum", "Synthesize a Raman spectrum");
  add_common(spectrum, true);
  auto* heat = app.add_subcommand("heat", "Estimate recoil heating during pumping");
  add_common(heat, true);
  auto* fit = app.add_subcommand("fit", "Fit alpha to observed fraction series");
  add_common(fit, true);
  fit->add_option("--data", opt.data, "Observation file (time_s, fraction[, weight]); repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*states) return cmd_states(opt);
    if (*pump) return cmd_pump(opt);
    if (*spectrum) return cmd_spectrum(opt);
    if (*heat) return cmd_heat(opt);
    if (*fit) return cmd_fit(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
