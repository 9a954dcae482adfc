#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pumpsim/kinetics.hpp"

namespace pumpsim {

/// Observed ground fraction of one sublevel over time.
struct ObservationSeries {
  SublevelLabel sublevel = SublevelLabel::ground(4, 0);
  std::vector<double> times;      // s, strictly increasing
  std::vector<double> fractions;  // in [0, 1] up to detection noise of at most 0.2
  std::vector<double> weights;    // empty: all 1
  bool fit_amplitude = false;     // free overall scale, solved in closed form

  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }

  /// Throws DataError naming the violated invariant.
  void validate() const;
};

/// Parses `time_s, fraction[, weight]` rows. `#` starts a comment; a
/// `# sublevel=g4_m1` comment selects the sublevel and a non-numeric first
/// row is taken as a header. Throws DataError naming `source` and the line.
ObservationSeries read_observations(std::istream& is, const std::string& source);
ObservationSeries read_observation_file(const std::filesystem::path& path);

/// Writes the format read_observations accepts.
void write_observations(std::ostream& os, const ObservationSeries& series);

struct FitOptions {
  double alpha_max = 0.2;
  int max_iterations = 100;
  double step_gamma = kDefaultStepGamma;
  bool prune = false;
  Populations initial = uniform_f4_populations();

  double tolerance() const { return 1e-4 * alpha_max; }
};

struct FitResult {
  double alpha_hat = 0.0;
  double sse = 0.0;
  int iterations = 0;
  bool converged = false;
  bool weakly_identified = false;
  std::vector<double> amplitudes;  // per series; 1 where not fitted
};

/// Simulated ground fraction for each series at its observation times,
/// computed by the forward kinetics with every beam contaminated by alpha.
std::vector<std::vector<double>> simulate_series(std::span<const ObservationSeries> series,
                                                 std::span<const BeamSpec> beams, double alpha,
                                                 const FitOptions& options = {});

struct ResidualReport {
  std::vector<std::vector<double>> residuals;  // amplitude * simulated - observed, per series
  std::vector<double> amplitudes;
  double sse = 0.0;  // weighted
};

/// Throws DataError for an empty or invalid series list.
ResidualReport residual_report(std::span<const ObservationSeries> series, std::span<const BeamSpec> beams,
                               double alpha, const FitOptions& options = {});

/// Bracketed scalar minimization of residual_report(...).sse over alpha in
/// [0, alpha_max]. Throws DataError for an empty or invalid series list.
FitResult fit_alpha(std::span<const ObservationSeries> series, std::span<const BeamSpec> beams,
                    const FitOptions& options = {});

}  // namespace pumpsim
