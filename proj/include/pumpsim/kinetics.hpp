#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pumpsim/atomic_structure.hpp"
#include "pumpsim/constants.hpp"

namespace pumpsim {

/// Hyperfine transition F -> F' a beam is tuned near.
struct HyperfineTransition {
  int ground_F = 4;
  int excited_F = 4;

  std::string name() const;  // "4->4'"
  friend constexpr bool operator==(const HyperfineTransition&, const HyperfineTransition&) = default;
};

/// Accepts "4->4", "4->4'" and "4-4". Throws std::invalid_argument.
HyperfineTransition parse_transition(std::string_view text);

/// Intensity fractions in sigma-, pi, sigma+.
struct PolarizationWeights {
  double minus = 0.0;
  double pi = 1.0;
  double plus = 0.0;

  /// q = m' - m of the absorption, in {-1, 0, +1}.
  double operator()(int q) const;
};

/// Weights of a nominally pi-polarized beam with sigma+/sigma- amplitude
/// contamination alpha: (alpha^2, 1, alpha^2) / (1 + 2 alpha^2).
PolarizationWeights polarization_weights(double alpha);

struct BeamSpec {
  HyperfineTransition target;
  double intensity_ratio = 0.0;  // I / I_s
  double detuning_gamma = 0.0;   // omega_L - omega_target, units of Gamma
  double linewidth = constants::laser_linewidth;  // Delta_L, rad/s
  PolarizationWeights polarization;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Copies `beams` with every polarization replaced by polarization_weights(alpha).
std::vector<BeamSpec> with_contamination(std::span<const BeamSpec> beams, double alpha);

/// Offset of the line F -> F1 from the laser, 2 (omega_{F->F1} - omega_L) / Gamma.
double normalized_offset(HyperfineTransition transition, const BeamSpec& laser);

/// Excitation overlap of a laser of relative width mu = Delta_L / Gamma with a
/// line at normalized offset `offset`.
double chi_overlap(double offset, double mu);

/// chi_overlap for `transition` under `laser`. Throws std::invalid_argument
/// when the transition is not dipole-allowed within the state space.
double chi(HyperfineTransition transition, const BeamSpec& laser);

/// Stimulated rate g <-> e (same in both directions), s^-1. Zero when the
/// beam does not address g's hyperfine level or the channel is forbidden.
double stimulated_rate(const SublevelLabel& g, const SublevelLabel& e, const BeamSpec& beam);

/// The same rate from an absolute intensity in W/m^2; beam.intensity_ratio is ignored.
double stimulated_rate_from_intensity(const SublevelLabel& g, const SublevelLabel& e,
                                      double intensity_w_per_m2, const BeamSpec& beam);

struct StimulatedTerm {
  std::size_t ground = 0;   // dense index
  std::size_t excited = 0;  // dense index
  double rate = 0.0;        // s^-1
  double chi = 0.0;
};

/// Generator R of dN/dt = R N over the 43 sublevel populations.
class RateMatrix {
 public:
  /// Spontaneous decay plus the given stimulated couplings.
  explicit RateMatrix(std::vector<StimulatedTerm> terms = {});

  const Eigen::MatrixXd& generator() const { return generator_; }
  const std::vector<StimulatedTerm>& stimulated_terms() const { return terms_; }
  double max_abs() const { return generator_.cwiseAbs().maxCoeff(); }

 private:
  Eigen::MatrixXd generator_;
  std::vector<StimulatedTerm> terms_;
};

/// Throws std::invalid_argument for an invalid beam.
RateMatrix assemble_rate_matrix(std::span<const BeamSpec> beams);

struct PruneResult {
  RateMatrix matrix;
  std::size_t active_count = 0;
};

/// Drops stimulated terms whose chi is below threshold * max(chi) and counts
/// the sublevels that still take part in a stimulated term.
PruneResult prune(const RateMatrix& matrix, double threshold);

inline constexpr double kDefaultPruneThreshold = 1e-3;
inline constexpr double kDefaultStepGamma = 0.01;  // Gamma * dt

using Populations = Eigen::VectorXd;

/// 1/9 in each F=4 ground sublevel.
Populations uniform_f4_populations();

/// All population in one sublevel.
Populations single_sublevel_populations(const SublevelLabel& label);

struct PopulationTrajectory {
  std::vector<double> times;
  std::vector<Populations> populations;
  std::vector<double> scattered_photons;  // cumulative per atom
  std::size_t clipped_entries = 0;        // roundoff negatives reset to zero

  /// `time_s, n_g3_m-3, ..., n_e5_m5, scattered_photons`, 17 significant digits.
  void write_csv(std::ostream& os) const;
};

struct IntegrationOptions {
  std::size_t steps_per_sample = 0;  // 0: chosen from max_samples
  std::size_t max_samples = 2000;
};

/// One classical RK4 step of dy/dt = A y applied column-wise to `y`.
Eigen::MatrixXd rk4_step(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double h);

/// Fixed-step RK4 propagation of the populations together with the photon
/// counter d(photons)/dt = Gamma * sum(excited). Between samples the step
/// map is applied through its matrix power.
class Rk4Propagator {
 public:
  /// Throws std::invalid_argument if dt <= 0 or dt * max|R| > 0.1.
  Rk4Propagator(const RateMatrix& matrix, double dt);

  double dt() const { return dt_; }

  /// Single-step map on the augmented (populations, photons) state.
  const Eigen::MatrixXd& step_map() const { return step_; }

  /// step_map()^steps.
  Eigen::MatrixXd power(std::size_t steps) const;

 private:
  double dt_;
  Eigen::MatrixXd step_;
};

/// Throws std::invalid_argument for negative or unnormalized n0, bad dt or t_end.
PopulationTrajectory integrate_rk4(const RateMatrix& matrix, const Populations& n0, double dt,
                                   double t_end, const IntegrationOptions& options = {});

/// Populations at arbitrary times (rounded to the nearest step), same stepping
/// as integrate_rk4. `times` must be nondecreasing and nonnegative.
std::vector<Populations> populations_at(const RateMatrix& matrix, const Populations& n0, double dt,
                                        std::span<const double> times);

/// Population of `label` as a fraction of the total ground-state population.
double ground_fraction(const Populations& n, const SublevelLabel& label);

/// Linearly interpolated first time a series reaches `level`.
struct Crossing {
  double time = 0.0;
  double photons = 0.0;
};
std::optional<Crossing> first_crossing(const PopulationTrajectory& trajectory,
                                       const SublevelLabel& label, double level);

struct ThresholdRun {
  std::optional<Crossing> crossing;
  double final_time = 0.0;
  double final_photons = 0.0;
};

/// Integrates until the ground fraction of `label` first reaches `level` or
/// t_end passes; the crossing is located to within 10 steps.
ThresholdRun run_until_fraction(const RateMatrix& matrix, const Populations& n0, double dt, double t_end,
                                const SublevelLabel& label, double level);

struct PumpMetrics {
  std::vector<double> m0_fraction;
  std::optional<double> tau_50;
  std::optional<double> photons_to_tau50;
};

/// Throws std::invalid_argument for an empty trajectory.
PumpMetrics pump_metrics(const PopulationTrajectory& trajectory);

/// Stationary populations (R N = 0, sum N = 1). Throws std::runtime_error if
/// the stationary state is not unique.
Populations steady_state(const RateMatrix& matrix);

}  // namespace pumpsim
