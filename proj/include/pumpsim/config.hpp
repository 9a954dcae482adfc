#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pumpsim/atomic_structure.hpp"
#include "pumpsim/heating.hpp"
#include "pumpsim/kinetics.hpp"
#include "pumpsim/raman.hpp"

namespace pumpsim {

struct NamedBeam {
  std::string name;  // the part after "beams."
  BeamSpec beam;
  double alpha = 0.0;
};

enum class SpectrumPopulations { dark, uniform_f4, pumped };

/// Scenario document. Every field has a default so a config file only lists
/// what it changes.
struct ScenarioConfig {
  // [constants]
  double laser_linewidth_hz = constants::laser_linewidth / constants::two_pi;
  double lande_g3 = constants::lande_g3;
  double lande_g4 = constants::lande_g4;

  // [beams.<name>], in file order
  std::vector<NamedBeam> beams;

  // [pulse]
  double tau_s = 7e-3;
  std::optional<double> rabi_rad_s;  // default: pi pulse
  Geometry geometry = Geometry::copropagating;

  // [field]
  double bias_gauss = 0.0;
  double rms_fluct_gauss = 0.0;

  // [velocity]
  double sigma_vr = 0.0;
  double mean_vr = 0.0;

  // [spectrum]
  SpectrumPopulations populations = SpectrumPopulations::dark;
  std::optional<double> half_span_hz;  // default depends on geometry
  std::optional<double> step_hz;

  // [integration]
  double dt_gamma = kDefaultStepGamma;
  double t_end_s = 5e-3;
  std::string initial = "uniform_f4";  // or a ground sublevel name
  std::size_t max_samples = 2000;

  // [mc]
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  double threshold = 0.95;
  bool absorption = true;

  // [recoil]
  RecoilGeometry recoil = RecoilGeometry::setup_default();

  // [fit]
  double alpha_max = 0.2;
  int max_iterations = 100;
  bool fit_amplitude = false;
  std::vector<std::filesystem::path> data;  // resolved against the config file's directory

  // [output]
  std::filesystem::path directory = ".";

  std::vector<BeamSpec> beam_specs() const;  // each with its own alpha applied
  /// The contamination shared by every beam. Throws ConfigError if they differ.
  double common_alpha() const;
  ZeemanParams zeeman() const;
  RamanPulse pulse() const;
  Populations initial_populations() const;
};

/// Parses an INI document. `#` and `;` start comments; unknown sections or
/// keys and out-of-range values throw ConfigError naming the key.
ScenarioConfig parse_config(std::istream& is, const std::string& source,
                            const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);

}  // namespace pumpsim
