#include "pumpsim/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "pumpsim/error.hpp"

namespace pumpsim {

namespace {

namespace pt = boost::property_tree;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Drops a trailing comment introduced by whitespace followed by '#' or ';'.
std::string strip_comment(std::string_view value) {
  for (std::size_t i = 1; i < value.size(); ++i) {
    if ((value[i] == '#' || value[i] == ';') && (value[i - 1] == ' ' || value[i - 1] == '\t')) {
      return std::string(trim(value.substr(0, i)));
    }
  }
  return std::string(trim(value));
}

// Value of one key with the context needed for error messages.
struct Field {
  std::string section;
  std::string key;
  std::string text;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("[" + section + "] " + key + ": " + what);
  }

  double number() const {
    std::string_view s = text;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out)) {
      fail("expected a number, got '" + text + "'");
    }
    return out;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be > 0");
    return v;
  }

  double nonnegative() const {
    const double v = number();
    if (!(v >= 0.0)) fail("must be >= 0");
    return v;
  }

  std::uint64_t unsigned_integer() const {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
      fail("expected a nonnegative integer, got '" + text + "'");
    }
    return out;
  }

  bool boolean() const {
    if (text == "true" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "no" || text == "0") return false;
    fail("expected true or false, got '" + text + "'");
  }

  Eigen::Vector3d vector3() const {
    std::vector<double> parts;
    std::string_view rest = text;
    while (true) {
      const auto comma = rest.find(',');
      Field part{section, key, std::string(trim(rest.substr(0, comma)))};
      parts.push_back(part.number());
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (parts.size() != 3) fail("expected three comma-separated components");
    const Eigen::Vector3d v(parts[0], parts[1], parts[2]);
    if (!(v.norm() > 0.0)) fail("vector must be nonzero");
    return v.normalized();
  }
};

using Handler = std::function<void(ScenarioConfig&, const Field&)>;
using HandlerTable = std::map<std::string, Handler, std::less<>>;

const HandlerTable& constants_keys() {
  static const HandlerTable table{
      {"laser_linewidth_hz", [](ScenarioConfig& c, const Field& f) { c.laser_linewidth_hz = f.positive(); }},
      {"lande_g3", [](ScenarioConfig& c, const Field& f) { c.lande_g3 = f.number(); }},
      {"lande_g4", [](ScenarioConfig& c, const Field& f) { c.lande_g4 = f.number(); }},
  };
  return table;
}

const HandlerTable& pulse_keys() {
  static const HandlerTable table{
      {"tau_s", [](ScenarioConfig& c, const Field& f) { c.tau_s = f.positive(); }},
      {"rabi_rad_s", [](ScenarioConfig& c, const Field& f) { c.rabi_rad_s = f.nonnegative(); }},
      {"geometry",
       [](ScenarioConfig& c, const Field& f) {
         try {
           c.geometry = parse_geometry(f.text);
         } catch (const std::invalid_argument& e) {
           f.fail(e.what());
         }
       }},
  };
  return table;
}

const HandlerTable& field_keys() {
  static const HandlerTable table{
      {"bias_gauss", [](ScenarioConfig& c, const Field& f) { c.bias_gauss = f.number(); }},
      {"rms_fluct_gauss", [](ScenarioConfig& c, const Field& f) { c.rms_fluct_gauss = f.nonnegative(); }},
  };
  return table;
}

const HandlerTable& velocity_keys() {
  static const HandlerTable table{
      {"sigma_vr", [](ScenarioConfig& c, const Field& f) { c.sigma_vr = f.nonnegative(); }},
      {"mean_vr", [](ScenarioConfig& c, const Field& f) { c.mean_vr = f.number(); }},
  };
  return table;
}

const HandlerTable& spectrum_keys() {
  static const HandlerTable table{
      {"populations",
       [](ScenarioConfig& c, const Field& f) {
         if (f.text == "dark") {
           c.populations = SpectrumPopulations::dark;
         } else if (f.text == "uniform_f4") {
           c.populations = SpectrumPopulations::uniform_f4;
         } else if (f.text == "pumped") {
           c.populations = SpectrumPopulations::pumped;
         } else {
           f.fail("expected dark, uniform_f4 or pumped, got '" + f.text + "'");
         }
       }},
      {"half_span_hz", [](ScenarioConfig& c, const Field& f) { c.half_span_hz = f.positive(); }},
      {"step_hz", [](ScenarioConfig& c, const Field& f) { c.step_hz = f.positive(); }},
  };
  return table;
}

const HandlerTable& integration_keys() {
  static const HandlerTable table{
      {"dt_gamma",
       [](ScenarioConfig& c, const Field& f) {
         c.dt_gamma = f.positive();
         if (c.dt_gamma > 0.1) f.fail("must be <= 0.1 for a stable fixed step");
       }},
      {"t_end_s", [](ScenarioConfig& c, const Field& f) { c.t_end_s = f.positive(); }},
      {"initial",
       [](ScenarioConfig& c, const Field& f) {
         if (f.text != "uniform_f4") {
           try {
             if (!parse_sublevel(f.text).is_ground()) f.fail("initial sublevel must be a ground sublevel");
           } catch (const std::invalid_argument& e) {
             f.fail(e.what());
           }
         }
         c.initial = f.text;
       }},
      {"max_samples",
       [](ScenarioConfig& c, const Field& f) {
         c.max_samples = f.unsigned_integer();
         if (c.max_samples < 2) f.fail("must be >= 2");
       }},
  };
  return table;
}

const HandlerTable& mc_keys() {
  static const HandlerTable table{
      {"samples",
       [](ScenarioConfig& c, const Field& f) {
         c.samples = f.unsigned_integer();
         if (c.samples < 1) f.fail("must be >= 1");
       }},
      {"seed", [](ScenarioConfig& c, const Field& f) { c.seed = f.unsigned_integer(); }},
      {"threads",
       [](ScenarioConfig& c, const Field& f) {
         const auto t = f.unsigned_integer();
         if (t < 1 || t > 1024) f.fail("must lie in [1, 1024]");
         c.threads = static_cast<unsigned>(t);
       }},
      {"threshold",
       [](ScenarioConfig& c, const Field& f) {
         c.threshold = f.number();
         if (!(c.threshold > 0.0 && c.threshold < 1.0)) f.fail("must lie in (0, 1)");
       }},
      {"absorption", [](ScenarioConfig& c, const Field& f) { c.absorption = f.boolean(); }},
  };
  return table;
}

const HandlerTable& recoil_keys() {
  static const HandlerTable table{
      {"pb_axis", [](ScenarioConfig& c, const Field& f) { c.recoil.pb_axis = f.vector3(); }},
      {"detection_axis", [](ScenarioConfig& c, const Field& f) { c.recoil.detection_axis = f.vector3(); }},
      {"backreflected", [](ScenarioConfig& c, const Field& f) { c.recoil.backreflected = f.boolean(); }},
  };
  return table;
}

const HandlerTable& output_keys() {
  static const HandlerTable table{
      {"directory",
       [](ScenarioConfig& c, const Field& f) {
         if (f.text.empty()) f.fail("must not be empty");
         c.directory = f.text;
       }},
  };
  return table;
}

const HandlerTable& beam_keys() {
  static const HandlerTable table{
      {"target",
       [](ScenarioConfig& c, const Field& f) {
         try {
           c.beams.back().beam.target = parse_transition(f.text);
         } catch (const std::invalid_argument& e) {
           f.fail(e.what());
         }
       }},
      {"intensity_ratio", [](ScenarioConfig& c, const Field& f) { c.beams.back().beam.intensity_ratio = f.nonnegative(); }},
      {"detuning_gamma", [](ScenarioConfig& c, const Field& f) { c.beams.back().beam.detuning_gamma = f.number(); }},
      {"alpha",
       [](ScenarioConfig& c, const Field& f) {
         c.beams.back().alpha = f.nonnegative();
         if (c.beams.back().alpha > 1.0) f.fail("must lie in [0, 1]");
       }},
  };
  return table;
}

void apply_section(ScenarioConfig& config, const std::string& section, const pt::ptree& body,
                   const HandlerTable& table, const std::function<void(ScenarioConfig&, const Field&)>& extra = {}) {
  for (const auto& [key, node] : body) {
    if (!node.empty()) throw ConfigError("[" + section + "] " + key + ": unexpected nesting");
    Field field{section, key, strip_comment(node.data())};
    const auto it = table.find(key);
    if (it != table.end()) {
      it->second(config, field);
    } else if (extra) {
      extra(config, field);
    } else {
      throw ConfigError("[" + section + "] unknown key '" + key + "'");
    }
  }
}

}  // namespace

std::vector<BeamSpec> ScenarioConfig::beam_specs() const {
  std::vector<BeamSpec> out;
  out.reserve(beams.size());
  for (const auto& nb : beams) {
    BeamSpec b = nb.beam;
    b.linewidth = constants::two_pi * laser_linewidth_hz;
    b.polarization = polarization_weights(nb.alpha);
    out.push_back(b);
  }
  return out;
}

double ScenarioConfig::common_alpha() const {
  if (beams.empty()) return 0.0;
  const double alpha = beams.front().alpha;
  for (const auto& nb : beams) {
    if (nb.alpha != alpha) {
      throw ConfigError("[beams." + nb.name + "] alpha: all beams must share one alpha for this command");
    }
  }
  return alpha;
}

ZeemanParams ScenarioConfig::zeeman() const { return {lande_g3, lande_g4, bias_gauss}; }

RamanPulse ScenarioConfig::pulse() const {
  RamanPulse p = RamanPulse::pi_pulse(tau_s, geometry);
  if (rabi_rad_s) p.rabi_frequency = *rabi_rad_s;
  return p;
}

Populations ScenarioConfig::initial_populations() const {
  if (initial == "uniform_f4") return uniform_f4_populations();
  return single_sublevel_populations(parse_sublevel(initial));
}

ScenarioConfig parse_config(std::istream& is, const std::string& source, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }

  ScenarioConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("key '" + section + "' must belong to a section");
    if (section.starts_with("beams.")) {
      const std::string name = section.substr(6);
      if (name.empty()) throw ConfigError("[" + section + "]: beam name missing");
      config.beams.push_back({name, BeamSpec{}, 0.0});
      apply_section(config, section, body, beam_keys());
      if (body.find("target") == body.not_found()) throw ConfigError("[" + section + "] target: required");
      BeamSpec check = config.beam_specs().back();
      try {
        check.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("[" + section + "]: " + e.what());
      }
    } else if (section == "constants") {
      apply_section(config, section, body, constants_keys());
    } else if (section == "pulse") {
      apply_section(config, section, body, pulse_keys());
    } else if (section == "field") {
      apply_section(config, section, body, field_keys());
    } else if (section == "velocity") {
      apply_section(config, section, body, velocity_keys());
    } else if (section == "spectrum") {
      apply_section(config, section, body, spectrum_keys());
    } else if (section == "integration") {
      apply_section(config, section, body, integration_keys());
    } else if (section == "mc") {
      apply_section(config, section, body, mc_keys());
    } else if (section == "recoil") {
      apply_section(config, section, body, recoil_keys());
    } else if (section == "output") {
      apply_section(config, section, body, output_keys());
    } else if (section == "fit") {
      apply_section(config, section, body, HandlerTable{
          {"alpha_max",
           [](ScenarioConfig& c, const Field& f) {
             c.alpha_max = f.positive();
             if (c.alpha_max > 1.0) f.fail("must lie in (0, 1]");
           }},
          {"max_iterations",
           [](ScenarioConfig& c, const Field& f) {
             const auto n = f.unsigned_integer();
             if (n < 1 || n > 100000) f.fail("must lie in [1, 100000]");
             c.max_iterations = static_cast<int>(n);
           }},
          {"fit_amplitude", [](ScenarioConfig& c, const Field& f) { c.fit_amplitude = f.boolean(); }},
          {"data",
           [&base_dir](ScenarioConfig& c, const Field& f) {
             std::string_view rest = f.text;
             while (!rest.empty()) {
               const auto comma = rest.find(',');
               const std::filesystem::path p(std::string(trim(rest.substr(0, comma))));
               if (p.empty()) f.fail("empty data path");
               c.data.push_back(p.is_absolute() ? p : base_dir / p);
               if (comma == std::string_view::npos) break;
               rest.remove_prefix(comma + 1);
             }
           }},
      });
    } else {
      throw ConfigError("unknown section [" + section + "]");
    }
  }
  return config;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  return parse_config(in, path.string(), path.parent_path());
}

}  // namespace pumpsim
