#include "pumpsim/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <stdexcept>

namespace pumpsim {

namespace {

constexpr std::size_t kAugmented = kNumStates + 1;
constexpr std::size_t kPhotonRow = kNumStates;

// Excited hyperfine energies relative to F'=3, Hz.
double excited_energy_hz(int F) {
  switch (F) {
    case 3: return 0.0;
    case 4: return constants::split_e3_e4;
    case 5: return constants::split_e3_e4 + constants::split_e4_e5;
    default: throw std::invalid_argument("no excited level F'=" + std::to_string(F));
  }
}

bool transition_in_space(HyperfineTransition t) {
  return (t.ground_F == 3 || t.ground_F == 4) && t.excited_F >= 3 && t.excited_F <= 5 &&
         std::abs(t.excited_F - t.ground_F) <= 1;
}

}  // namespace

std::string HyperfineTransition::name() const {
  return std::to_string(ground_F) + "->" + std::to_string(excited_F) + "'";
}

HyperfineTransition parse_transition(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c != ' ' && c != '\'') s.push_back(c);
  }
  auto sep = s.find("->");
  std::size_t skip = 2;
  if (sep == std::string::npos) {
    sep = s.find('-');
    skip = 1;
  }
  if (sep == std::string::npos || sep == 0 || sep + skip >= s.size()) {
    throw std::invalid_argument("bad transition '" + std::string(text) + "', expected e.g. 4->4'");
  }
  HyperfineTransition t;
  try {
    std::size_t used = 0;
    const std::string lhs = s.substr(0, sep);
    const std::string rhs = s.substr(sep + skip);
    t.ground_F = std::stoi(lhs, &used);
    if (used != lhs.size()) throw std::invalid_argument("");
    t.excited_F = std::stoi(rhs, &used);
    if (used != rhs.size()) throw std::invalid_argument("");
  } catch (const std::logic_error&) {
    throw std::invalid_argument("bad transition '" + std::string(text) + "', expected e.g. 4->4'");
  }
  if (!transition_in_space(t)) {
    throw std::invalid_argument("transition " + t.name() + " is outside the state space");
  }
  return t;
}

double PolarizationWeights::operator()(int q) const {
  switch (q) {
    case -1: return minus;
    case 0: return pi;
    case 1: return plus;
    default: return 0.0;
  }
}

PolarizationWeights polarization_weights(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("depolarization alpha must be >= 0, got " + std::to_string(alpha));
  }
  const double a2 = alpha * alpha;
  const double norm = 1.0 + 2.0 * a2;
  return {a2 / norm, 1.0 / norm, a2 / norm};
}

void BeamSpec::validate() const {
  if (!transition_in_space(target)) {
    throw std::invalid_argument("beam targets unknown transition " + target.name());
  }
  if (!(intensity_ratio >= 0.0) || !std::isfinite(intensity_ratio)) {
    throw std::invalid_argument("beam intensity_ratio must be >= 0");
  }
  if (!std::isfinite(detuning_gamma)) throw std::invalid_argument("beam detuning must be finite");
  if (!(linewidth > 0.0) || !std::isfinite(linewidth)) {
    throw std::invalid_argument("beam linewidth must be > 0");
  }
  const PolarizationWeights& w = polarization;
  if (!(w.minus >= 0.0 && w.pi >= 0.0 && w.plus >= 0.0) ||
      std::abs(w.minus + w.pi + w.plus - 1.0) > 1e-12) {
    throw std::invalid_argument("polarization weights must be nonnegative and sum to 1");
  }
}

std::vector<BeamSpec> with_contamination(std::span<const BeamSpec> beams, double alpha) {
  const PolarizationWeights w = polarization_weights(alpha);
  std::vector<BeamSpec> out(beams.begin(), beams.end());
  for (auto& b : out) b.polarization = w;
  return out;
}

double normalized_offset(HyperfineTransition transition, const BeamSpec& laser) {
  if (transition.ground_F != laser.target.ground_F) {
    throw std::invalid_argument("transition " + transition.name() +
                                " does not start from the beam's ground level");
  }
  const double line_minus_target_hz =
      excited_energy_hz(transition.excited_F) - excited_energy_hz(laser.target.excited_F);
  return 2.0 * (line_minus_target_hz / constants::gamma_hz - laser.detuning_gamma);
}

double chi_overlap(double offset, double mu) {
  if (std::abs(offset) < 1e-9 && std::abs(mu - 1.0) < 1e-9) return mu / (mu + 1.0);
  const double d2 = offset * offset;
  const double num = d2 + (mu - 1.0) * (mu - 1.0);
  const double den_root = d2 + mu * mu - 1.0;
  return mu * (mu + 1.0) * num / (den_root * den_root + 4.0 * d2);
}

double chi(HyperfineTransition transition, const BeamSpec& laser) {
  if (!transition_in_space(transition)) {
    throw std::invalid_argument("transition " + transition.name() + " is outside the state space");
  }
  return chi_overlap(normalized_offset(transition, laser), laser.linewidth / constants::gamma);
}

namespace {

// chi * a * eps_q^2, or 0 when the beam does not address the pair.
double coupling_factor(const SublevelLabel& g, const SublevelLabel& e, const BeamSpec& beam) {
  if (!g.is_ground() || !e.is_excited()) {
    throw std::invalid_argument("stimulated rate needs a ground and an excited sublevel");
  }
  if (!is_valid(g) || !is_valid(e)) throw std::invalid_argument("sublevel outside the state space");
  const int q = e.m - g.m;
  if (g.F != beam.target.ground_F || std::abs(q) > 1 || std::abs(e.F - g.F) > 1) return 0.0;
  const double weight = beam.polarization(q);
  if (weight == 0.0) return 0.0;
  const double a = branching_ratio(e, g);
  if (a == 0.0) return 0.0;
  return chi({g.F, e.F}, beam) * a * weight;
}

}  // namespace

double stimulated_rate(const SublevelLabel& g, const SublevelLabel& e, const BeamSpec& beam) {
  const double factor = coupling_factor(g, e, beam);
  return 0.5 * constants::gamma * (constants::gamma / beam.linewidth) * beam.intensity_ratio * factor;
}

double stimulated_rate_from_intensity(const SublevelLabel& g, const SublevelLabel& e,
                                      double intensity_w_per_m2, const BeamSpec& beam) {
  using namespace constants;
  const double factor = coupling_factor(g, e, beam);
  const double lambda3 = wavelength * wavelength * wavelength;
  return 1.5 * lambda3 / (pi * planck * speed_of_light) * (intensity_w_per_m2 / beam.linewidth) *
         factor * gamma;
}

RateMatrix::RateMatrix(std::vector<StimulatedTerm> terms)
    : generator_(Eigen::MatrixXd::Zero(kNumStates, kNumStates)), terms_(std::move(terms)) {
  const auto& branching = BranchingTable::instance();
  for (std::size_t e = 0; e < kNumExcited; ++e) {
    const auto col = static_cast<Eigen::Index>(kNumGround + e);
    generator_(col, col) -= constants::gamma;
    for (std::size_t g = 0; g < kNumGround; ++g) {
      generator_(static_cast<Eigen::Index>(g), col) += constants::gamma * branching.at(e, g);
    }
  }
  for (const auto& t : terms_) {
    const auto g = static_cast<Eigen::Index>(t.ground);
    const auto e = static_cast<Eigen::Index>(t.excited);
    generator_(e, g) += t.rate;
    generator_(g, g) -= t.rate;
    generator_(g, e) += t.rate;
    generator_(e, e) -= t.rate;
  }
}

RateMatrix assemble_rate_matrix(std::span<const BeamSpec> beams) {
  std::vector<StimulatedTerm> terms;
  const auto states = enumerate_states();
  for (const auto& beam : beams) {
    beam.validate();
    for (std::size_t gi = 0; gi < kNumGround; ++gi) {
      const SublevelLabel& g = states[gi];
      if (g.F != beam.target.ground_F) continue;
      for (std::size_t ei = kNumGround; ei < kNumStates; ++ei) {
        const SublevelLabel& e = states[ei];
        if (std::abs(e.F - g.F) > 1 || std::abs(e.m - g.m) > 1) continue;
        const double rate = stimulated_rate(g, e, beam);
        if (rate == 0.0) continue;
        terms.push_back({gi, ei, rate, chi({g.F, e.F}, beam)});
      }
    }
  }
  return RateMatrix(std::move(terms));
}

PruneResult prune(const RateMatrix& matrix, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("prune threshold must lie in (0, 1]");
  }
  const auto& terms = matrix.stimulated_terms();
  double chi_max = 0.0;
  for (const auto& t : terms) chi_max = std::max(chi_max, t.chi);

  std::vector<StimulatedTerm> kept;
  std::set<std::size_t> active;
  for (const auto& t : terms) {
    if (t.chi < threshold * chi_max) continue;
    kept.push_back(t);
    active.insert(t.ground);
    active.insert(t.excited);
  }
  return {RateMatrix(std::move(kept)), active.size()};
}

Populations uniform_f4_populations() {
  Populations n = Populations::Zero(kNumStates);
  for (int m = -4; m <= 4; ++m) n(static_cast<Eigen::Index>(index_of(SublevelLabel::ground(4, m)))) = 1.0 / 9.0;
  return n;
}

Populations single_sublevel_populations(const SublevelLabel& label) {
  Populations n = Populations::Zero(kNumStates);
  n(static_cast<Eigen::Index>(index_of(label))) = 1.0;
  return n;
}

void PopulationTrajectory::write_csv(std::ostream& os) const {
  os << "time_s";
  for (const auto& label : enumerate_states()) os << ", n_" << label.name();
  os << ", scattered_photons\n";
  const auto old_precision = os.precision(17);
  for (std::size_t i = 0; i < times.size(); ++i) {
    os << times[i];
    for (Eigen::Index k = 0; k < populations[i].size(); ++k) os << ", " << populations[i](k);
    os << ", " << scattered_photons[i] << '\n';
  }
  os.precision(old_precision);
}

Eigen::MatrixXd rk4_step(const Eigen::MatrixXd& a, const Eigen::MatrixXd& y, double h) {
  const Eigen::MatrixXd k1 = a * y;
  const Eigen::MatrixXd k2 = a * (y + 0.5 * h * k1);
  const Eigen::MatrixXd k3 = a * (y + 0.5 * h * k2);
  const Eigen::MatrixXd k4 = a * (y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Rk4Propagator::Rk4Propagator(const RateMatrix& matrix, double dt) : dt_(dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be > 0");
  if (dt * matrix.max_abs() > 0.1) {
    throw std::invalid_argument("unstable step: dt * max|R| = " + std::to_string(dt * matrix.max_abs()) +
                                " exceeds 0.1");
  }
  Eigen::MatrixXd augmented = Eigen::MatrixXd::Zero(kAugmented, kAugmented);
  augmented.topLeftCorner(kNumStates, kNumStates) = matrix.generator();
  for (std::size_t e = kNumGround; e < kNumStates; ++e) {
    augmented(kPhotonRow, static_cast<Eigen::Index>(e)) = constants::gamma;
  }
  step_ = rk4_step(augmented, Eigen::MatrixXd::Identity(kAugmented, kAugmented), dt);
}

Eigen::MatrixXd Rk4Propagator::power(std::size_t steps) const {
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(kAugmented, kAugmented);
  Eigen::MatrixXd base = step_;
  while (steps > 0) {
    if (steps & 1U) result = base * result;
    steps >>= 1U;
    if (steps > 0) base = base * base;
  }
  return result;
}

namespace {

void check_initial(const Populations& n0) {
  if (n0.size() != static_cast<Eigen::Index>(kNumStates)) {
    throw std::invalid_argument("initial populations must have 43 entries");
  }
  if ((n0.array() < 0.0).any()) throw std::invalid_argument("negative initial population");
  if (std::abs(n0.sum() - 1.0) > 1e-9) throw std::invalid_argument("initial populations must sum to 1");
}

std::size_t clip_roundoff(Eigen::VectorXd& y) {
  std::size_t clipped = 0;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(kNumStates); ++k) {
    if (y(k) < 0.0 && y(k) >= -1e-12) {
      y(k) = 0.0;
      ++clipped;
    }
  }
  return clipped;
}

}  // namespace

PopulationTrajectory integrate_rk4(const RateMatrix& matrix, const Populations& n0, double dt,
                                   double t_end, const IntegrationOptions& options) {
  check_initial(n0);
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be >= 0");
  const Rk4Propagator propagator(matrix, dt);

  const auto total_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  std::size_t per_sample = options.steps_per_sample;
  if (per_sample == 0) {
    const std::size_t max_samples = std::max<std::size_t>(options.max_samples, 1);
    per_sample = std::max<std::size_t>(1, (total_steps + max_samples - 1) / max_samples);
  }

  PopulationTrajectory out;
  Eigen::VectorXd y(kAugmented);
  y.head(kNumStates) = n0;
  y(kPhotonRow) = 0.0;
  auto record = [&](std::size_t step) {
    out.times.push_back(static_cast<double>(step) * dt);
    out.populations.emplace_back(y.head(kNumStates));
    out.scattered_photons.push_back(y(kPhotonRow));
  };
  record(0);

  const Eigen::MatrixXd block = propagator.power(per_sample);
  std::size_t step = 0;
  while (step + per_sample <= total_steps) {
    y = block * y;
    step += per_sample;
    out.clipped_entries += clip_roundoff(y);
    record(step);
  }
  if (step < total_steps) {
    y = propagator.power(total_steps - step) * y;
    out.clipped_entries += clip_roundoff(y);
    record(total_steps);
  }
  return out;
}

std::vector<Populations> populations_at(const RateMatrix& matrix, const Populations& n0, double dt,
                                        std::span<const double> times) {
  check_initial(n0);
  const Rk4Propagator propagator(matrix, dt);
  std::vector<Populations> out;
  out.reserve(times.size());
  Eigen::VectorXd y(kAugmented);
  y.head(kNumStates) = n0;
  y(kPhotonRow) = 0.0;

  // Uniformly spaced observation times reuse one block power.
  std::size_t current = 0;
  std::size_t cached_steps = 0;
  Eigen::MatrixXd cached;
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("observation time must be >= 0");
    const auto target = static_cast<std::size_t>(std::llround(t / dt));
    if (target < current) throw std::invalid_argument("observation times must be nondecreasing");
    const std::size_t delta = target - current;
    if (delta > 0) {
      if (delta != cached_steps) {
        cached = propagator.power(delta);
        cached_steps = delta;
      }
      y = cached * y;
      clip_roundoff(y);
      current = target;
    }
    out.emplace_back(y.head(kNumStates));
  }
  return out;
}

double ground_fraction(const Populations& n, const SublevelLabel& label) {
  const double ground = n.head(kNumGround).sum();
  if (ground <= 0.0) return 0.0;
  return n(static_cast<Eigen::Index>(index_of(label))) / ground;
}

std::optional<Crossing> first_crossing(const PopulationTrajectory& trajectory,
                                       const SublevelLabel& label, double level) {
  double prev_f = 0.0;
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    const double f = ground_fraction(trajectory.populations[i], label);
    if (f >= level) {
      if (i == 0) return Crossing{trajectory.times[0], trajectory.scattered_photons[0]};
      const double w = (level - prev_f) / (f - prev_f);
      const auto lerp = [w](double a, double b) { return a + w * (b - a); };
      return Crossing{lerp(trajectory.times[i - 1], trajectory.times[i]),
                      lerp(trajectory.scattered_photons[i - 1], trajectory.scattered_photons[i])};
    }
    prev_f = f;
  }
  return std::nullopt;
}

ThresholdRun run_until_fraction(const RateMatrix& matrix, const Populations& n0, double dt, double t_end,
                                const SublevelLabel& label, double level) {
  check_initial(n0);
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be >= 0");
  const Rk4Propagator propagator(matrix, dt);
  const auto total_steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  constexpr std::size_t kCoarse = 1000;
  constexpr std::size_t kFine = 10;

  Eigen::VectorXd y(kAugmented);
  y.head(kNumStates) = n0;
  y(kPhotonRow) = 0.0;
  const auto fraction = [&](const Eigen::VectorXd& v) {
    return ground_fraction(v.head(kNumStates), label);
  };

  ThresholdRun run;
  if (fraction(y) >= level) {
    run.crossing = Crossing{0.0, 0.0};
    return run;
  }
  const Eigen::MatrixXd coarse = propagator.power(kCoarse);
  const Eigen::MatrixXd fine = propagator.power(kFine);
  std::size_t step = 0;
  while (step < total_steps) {
    const std::size_t n = std::min(kCoarse, total_steps - step);
    Eigen::VectorXd next = n == kCoarse ? Eigen::VectorXd(coarse * y) : Eigen::VectorXd(propagator.power(n) * y);
    clip_roundoff(next);
    if (fraction(next) >= level) {
      // Refine inside the coarse block.
      Eigen::VectorXd prev = y;
      std::size_t s = step;
      while (s < step + n) {
        const std::size_t m = std::min(kFine, step + n - s);
        Eigen::VectorXd cur = m == kFine ? Eigen::VectorXd(fine * prev) : Eigen::VectorXd(propagator.power(m) * prev);
        clip_roundoff(cur);
        const double f0 = fraction(prev);
        const double f1 = fraction(cur);
        if (f1 >= level) {
          const double w = (level - f0) / (f1 - f0);
          run.crossing = Crossing{(static_cast<double>(s) + w * static_cast<double>(m)) * dt,
                                  prev(kPhotonRow) + w * (cur(kPhotonRow) - prev(kPhotonRow))};
          run.final_time = static_cast<double>(s + m) * dt;
          run.final_photons = cur(kPhotonRow);
          return run;
        }
        prev = cur;
        s += m;
      }
    }
    y = next;
    step += n;
  }
  run.final_time = static_cast<double>(step) * dt;
  run.final_photons = y(kPhotonRow);
  return run;
}

PumpMetrics pump_metrics(const PopulationTrajectory& trajectory) {
  if (trajectory.times.empty()) throw std::invalid_argument("empty trajectory");
  const SublevelLabel dark = SublevelLabel::ground(4, 0);
  PumpMetrics metrics;
  metrics.m0_fraction.reserve(trajectory.times.size());
  for (const auto& n : trajectory.populations) metrics.m0_fraction.push_back(ground_fraction(n, dark));
  if (auto crossing = first_crossing(trajectory, dark, 0.5)) {
    metrics.tau_50 = crossing->time;
    metrics.photons_to_tau50 = crossing->photons;
  }
  return metrics;
}

Populations steady_state(const RateMatrix& matrix) {
  Eigen::MatrixXd system = matrix.generator();
  system.row(static_cast<Eigen::Index>(kNumStates) - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kNumStates);
  rhs(static_cast<Eigen::Index>(kNumStates) - 1) = 1.0;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (lu.rank() < static_cast<Eigen::Index>(kNumStates)) {
    throw std::runtime_error("stationary state is not unique for this rate matrix");
  }
  return lu.solve(rhs);
}

}  // namespace pumpsim
