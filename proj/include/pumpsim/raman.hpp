#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pumpsim/atomic_structure.hpp"

namespace pumpsim {

enum class Geometry { copropagating, counterpropagating };

Geometry parse_geometry(std::string_view text);
std::string to_string(Geometry geometry);

struct RamanPulse {
  double duration = 7e-3;  // s
  double rabi_frequency = constants::pi / 7e-3;  // rad/s
  Geometry geometry = Geometry::copropagating;

  /// Square pulse of area pi.
  static RamanPulse pi_pulse(double duration, Geometry geometry);

  void validate() const;
};

struct VelocityDistribution {
  double sigma_vr = 0.0;
  double mean_vr = 0.0;
};

struct Spectrum {
  std::vector<double> detuning_hz;
  std::vector<double> signal;

  /// `detuning_hz, signal` followed by `# key=value` lines.
  void write_csv(std::ostream& os,
                 std::span<const std::pair<std::string, std::string>> report = {}) const;
};

/// Evenly spaced detuning grid [-half_span, +half_span], Hz.
std::vector<double> detuning_grid(double half_span_hz, double step_hz);

/// Square-pulse two-level transfer probability at two-photon detuning delta_hz.
double rabi_lineshape(double delta_hz, const RamanPulse& pulse);

/// Full width at half maximum of rabi_lineshape found by root bracketing, Hz.
double rabi_fwhm(const RamanPulse& pulse);

struct CopropagatingOptions {
  std::array<double, 7> line_weights{1, 1, 1, 1, 1, 1, 1};  // m = -3..3
  double field_rms_gauss = 0.0;  // Gaussian smearing of the m != 0 line positions
};

/// Sum over m=-3..3 of pop(g4,m) times the Rabi line at its Zeeman offset.
/// Throws std::invalid_argument for a counterpropagating pulse.
Spectrum synth_copropagating(std::span<const double> populations, const ZeemanParams& params,
                             const RamanPulse& pulse, std::span<const double> grid,
                             const CopropagatingOptions& options = {});

/// Two-photon Doppler shift of a velocity given in v_r, Hz.
double doppler_shift(double v_vr, Geometry geometry = Geometry::counterpropagating);

/// Copropagating composite line convolved with the velocity distribution
/// through doppler_shift. Throws std::invalid_argument for sigma < 0 or a
/// copropagating pulse.
Spectrum synth_counterpropagating(std::span<const double> populations, const VelocityDistribution& vdist,
                                  const RamanPulse& pulse, std::span<const double> grid,
                                  const ZeemanParams& params = {});

/// Width of the sampled spectrum's main peak by linear interpolation, Hz.
/// Throws std::invalid_argument if the half-maximum is not crossed on both sides.
double measure_fwhm(const Spectrum& spectrum);

struct GaussianFit {
  double center_hz = 0.0;
  double sigma_hz = 0.0;
  double amplitude = 0.0;
  double rms_residual = 0.0;
  double sigma_vr = 0.0;
  double sigma_m_per_s = 0.0;
  double temperature_uk = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Least-squares fit of amplitude * exp(-(x - center)^2 / (2 sigma^2)).
/// Non-convergence is reported through `converged`, with the best parameters
/// found. Throws std::invalid_argument for fewer than 7 samples or negative signal.
GaussianFit fit_gaussian(const Spectrum& spectrum, int max_iterations = 400);

/// T = M sigma_v^2 / k_B in microkelvin.
double temperature_uk(double sigma_vr);

struct VelocityResolution {
  double vr = 0.0;
  double m_per_s = 0.0;
};

/// Counterpropagating FWHM converted to a velocity width.
VelocityResolution velocity_resolution(double fwhm_hz);

}  // namespace pumpsim
