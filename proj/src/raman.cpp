#include "pumpsim/raman.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

namespace pumpsim {

namespace {

constexpr double kFwhmPerSigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

// Normalized trapezoid nodes for a unit Gaussian over +-6 sigma. `count` is
// rounded up to an odd number so the center is a node.
struct GaussianNodes {
  std::vector<double> x;  // units of sigma
  std::vector<double> w;
};

GaussianNodes gaussian_nodes(std::size_t count) {
  count = std::max<std::size_t>(count, 3) | 1U;
  GaussianNodes nodes;
  nodes.x.resize(count);
  nodes.w.resize(count);
  const double step = 12.0 / static_cast<double>(count - 1);
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double x = -6.0 + step * static_cast<double>(k);
    const double end = (k == 0 || k + 1 == count) ? 0.5 : 1.0;
    nodes.x[k] = x;
    nodes.w[k] = end * std::exp(-0.5 * x * x);
    total += nodes.w[k];
  }
  for (auto& w : nodes.w) w /= total;
  return nodes;
}

void check_populations(std::span<const double> populations) {
  if (populations.size() != kNumStates) {
    throw std::invalid_argument("populations must have 43 entries");
  }
  for (double p : populations) {
    if (!(p >= -1e-12) || !std::isfinite(p)) throw std::invalid_argument("invalid population value");
  }
}

struct Line {
  double weight;
  double offset_hz;
  double smear_hz;  // rms position jitter
};

std::vector<Line> raman_lines(std::span<const double> populations, const ZeemanParams& params,
                              const CopropagatingOptions& options) {
  std::vector<Line> lines;
  const double hz_per_gauss_per_m = (params.g4 - params.g3) * constants::bohr_hz_per_gauss;
  for (int m = -3; m <= 3; ++m) {
    const double pop = populations[index_of(SublevelLabel::ground(4, m))];
    const double weight = pop * options.line_weights[static_cast<std::size_t>(m + 3)];
    if (weight <= 0.0) continue;
    lines.push_back({weight, raman_line_offset(m, params),
                     std::abs(m * hz_per_gauss_per_m) * options.field_rms_gauss});
  }
  return lines;
}

// Composite copropagating signal at detuning delta, including position jitter.
double composite(double delta_hz, const std::vector<Line>& lines, const RamanPulse& pulse,
                 const GaussianNodes& jitter) {
  double sum = 0.0;
  for (const auto& line : lines) {
    if (line.smear_hz == 0.0) {
      sum += line.weight * rabi_lineshape(delta_hz - line.offset_hz, pulse);
      continue;
    }
    double smeared = 0.0;
    for (std::size_t k = 0; k < jitter.x.size(); ++k) {
      smeared += jitter.w[k] * rabi_lineshape(delta_hz - line.offset_hz - line.smear_hz * jitter.x[k], pulse);
    }
    sum += line.weight * smeared;
  }
  return sum;
}

Spectrum make_spectrum(std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("empty detuning grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("detuning grid must be strictly increasing");
  }
  Spectrum s;
  s.detuning_hz.assign(grid.begin(), grid.end());
  s.signal.resize(grid.size());
  return s;
}

}  // namespace

Geometry parse_geometry(std::string_view text) {
  if (text == "copropagating") return Geometry::copropagating;
  if (text == "counterpropagating") return Geometry::counterpropagating;
  throw std::invalid_argument("unknown geometry '" + std::string(text) +
                              "', expected copropagating or counterpropagating");
}

std::string to_string(Geometry geometry) {
  return geometry == Geometry::copropagating ? "copropagating" : "counterpropagating";
}

RamanPulse RamanPulse::pi_pulse(double duration, Geometry geometry) {
  return {duration, constants::pi / duration, geometry};
}

void RamanPulse::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) throw std::invalid_argument("pulse duration must be > 0");
  if (!(rabi_frequency >= 0.0) || !std::isfinite(rabi_frequency)) {
    throw std::invalid_argument("Rabi frequency must be >= 0");
  }
}

void Spectrum::write_csv(std::ostream& os,
                         std::span<const std::pair<std::string, std::string>> report) const {
  os << "detuning_hz, signal\n";
  const auto old_precision = os.precision(17);
  for (std::size_t i = 0; i < detuning_hz.size(); ++i) os << detuning_hz[i] << ", " << signal[i] << '\n';
  os.precision(old_precision);
  for (const auto& [key, value] : report) os << "# " << key << '=' << value << '\n';
}

std::vector<double> detuning_grid(double half_span_hz, double step_hz) {
  if (!(half_span_hz > 0.0) || !(step_hz > 0.0)) throw std::invalid_argument("grid span and step must be > 0");
  const auto half = static_cast<long long>(std::llround(half_span_hz / step_hz));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(2 * half + 1));
  for (long long k = -half; k <= half; ++k) grid.push_back(static_cast<double>(k) * step_hz);
  return grid;
}

double rabi_lineshape(double delta_hz, const RamanPulse& pulse) {
  const double omega2 = pulse.rabi_frequency * pulse.rabi_frequency;
  if (omega2 == 0.0) return 0.0;
  const double delta = constants::two_pi * delta_hz;
  const double generalized2 = omega2 + delta * delta;
  const double s = std::sin(0.5 * std::sqrt(generalized2) * pulse.duration);
  return omega2 / generalized2 * s * s;
}

double rabi_fwhm(const RamanPulse& pulse) {
  pulse.validate();
  const double peak = rabi_lineshape(0.0, pulse);
  if (peak <= 0.0) throw std::invalid_argument("pulse produces no transfer at line center");
  const auto f = [&](double d) { return rabi_lineshape(d, pulse) - 0.5 * peak; };
  // March outward in steps well below the line width to bracket the first crossing.
  const double step = 0.01 / pulse.duration;
  double lo = 0.0;
  double hi = step;
  while (f(hi) > 0.0) {
    lo = hi;
    hi += step;
    if (hi > 1e4 / pulse.duration) throw std::runtime_error("half maximum not found");
  }
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      f, lo, hi, boost::math::tools::eps_tolerance<double>(50), max_iter);
  return a + b;  // symmetric line: 2 * half-width
}

Spectrum synth_copropagating(std::span<const double> populations, const ZeemanParams& params,
                             const RamanPulse& pulse, std::span<const double> grid,
                             const CopropagatingOptions& options) {
  pulse.validate();
  if (pulse.geometry != Geometry::copropagating) {
    throw std::invalid_argument("synth_copropagating needs a copropagating pulse");
  }
  if (!(options.field_rms_gauss >= 0.0)) throw std::invalid_argument("field rms must be >= 0");
  check_populations(populations);
  const auto lines = raman_lines(populations, params, options);
  const GaussianNodes jitter = gaussian_nodes(201);
  Spectrum s = make_spectrum(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) s.signal[i] = composite(grid[i], lines, pulse, jitter);
  return s;
}

double doppler_shift(double v_vr, Geometry geometry) {
  return geometry == Geometry::counterpropagating ? v_vr * constants::doppler_hz_per_vr : 0.0;
}

Spectrum synth_counterpropagating(std::span<const double> populations, const VelocityDistribution& vdist,
                                  const RamanPulse& pulse, std::span<const double> grid,
                                  const ZeemanParams& params) {
  pulse.validate();
  if (pulse.geometry != Geometry::counterpropagating) {
    throw std::invalid_argument("synth_counterpropagating needs a counterpropagating pulse");
  }
  if (!(vdist.sigma_vr >= 0.0) || !std::isfinite(vdist.sigma_vr)) {
    throw std::invalid_argument("velocity sigma must be >= 0");
  }
  check_populations(populations);
  const auto lines = raman_lines(populations, params, {});
  const GaussianNodes unused = gaussian_nodes(3);
  const double center_shift = doppler_shift(vdist.mean_vr);
  const double sigma_hz = doppler_shift(vdist.sigma_vr);

  // Node spacing resolves the Fourier-limited line (quarter of its width).
  const double line_width = 0.8 / pulse.duration;
  const auto resolve = static_cast<std::size_t>(std::ceil(12.0 * sigma_hz / (0.25 * line_width)));
  const GaussianNodes nodes = gaussian_nodes(std::max<std::size_t>(201, resolve + 1));

  Spectrum s = make_spectrum(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double base = grid[i] - center_shift;
    if (sigma_hz == 0.0) {
      s.signal[i] = composite(base, lines, pulse, unused);
      continue;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < nodes.x.size(); ++k) {
      sum += nodes.w[k] * composite(base - sigma_hz * nodes.x[k], lines, pulse, unused);
    }
    s.signal[i] = sum;
  }
  return s;
}

double measure_fwhm(const Spectrum& spectrum) {
  const auto& x = spectrum.detuning_hz;
  const auto& y = spectrum.signal;
  if (x.size() < 3 || x.size() != y.size()) throw std::invalid_argument("spectrum too short for a width");
  const auto peak_it = std::max_element(y.begin(), y.end());
  const auto peak = static_cast<std::size_t>(peak_it - y.begin());
  const double half = 0.5 * *peak_it;
  if (!(half > 0.0)) throw std::invalid_argument("spectrum has no positive peak");

  std::size_t l = peak;
  while (l > 0 && y[l - 1] >= half) --l;
  std::size_t r = peak;
  while (r + 1 < y.size() && y[r + 1] >= half) ++r;
  if (l == 0 || r + 1 == y.size()) throw std::invalid_argument("half maximum not crossed inside the grid");
  const auto cross = [&](std::size_t inside, std::size_t outside) {
    return x[outside] + (half - y[outside]) / (y[inside] - y[outside]) * (x[inside] - x[outside]);
  };
  return cross(r, r + 1) - cross(l, l - 1);
}

namespace {

// Residuals in scaled coordinates u = (x - x0) / scale; parameters are
// (amplitude, center_u, sigma_u).
struct GaussianResiduals {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  Eigen::VectorXd u;
  Eigen::VectorXd y;

  int inputs() const { return 3; }
  int values() const { return static_cast<int>(u.size()); }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double z = (u(i) - p(1)) / p(2);
      f(i) = p(0) * std::exp(-0.5 * z * z) - y(i);
    }
    return 0;
  }

  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double z = (u(i) - p(1)) / p(2);
      const double g = std::exp(-0.5 * z * z);
      jac(i, 0) = g;
      jac(i, 1) = p(0) * g * z / p(2);
      jac(i, 2) = p(0) * g * z * z / p(2);
    }
    return 0;
  }
};

}  // namespace

GaussianFit fit_gaussian(const Spectrum& spectrum, int max_iterations) {
  const auto& x = spectrum.detuning_hz;
  const auto& y = spectrum.signal;
  if (x.size() < 7 || x.size() != y.size()) throw std::invalid_argument("Gaussian fit needs at least 7 samples");
  for (double v : y) {
    if (!(v >= 0.0)) throw std::invalid_argument("Gaussian fit needs a nonnegative signal");
  }

  const auto peak_it = std::max_element(y.begin(), y.end());
  const double x_peak = x[static_cast<std::size_t>(peak_it - y.begin())];
  double sigma0 = 0.0;
  try {
    sigma0 = measure_fwhm(spectrum) / kFwhmPerSigma;
  } catch (const std::invalid_argument&) {
    double w = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      w += y[i];
      m2 += y[i] * (x[i] - x_peak) * (x[i] - x_peak);
    }
    sigma0 = w > 0.0 ? std::sqrt(m2 / w) : (x.back() - x.front()) / 4.0;
  }
  if (!(sigma0 > 0.0)) sigma0 = (x.back() - x.front()) / 4.0;

  const double scale = sigma0;
  GaussianResiduals functor;
  functor.u.resize(static_cast<Eigen::Index>(x.size()));
  functor.y.resize(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    functor.u(static_cast<Eigen::Index>(i)) = (x[i] - x_peak) / scale;
    functor.y(static_cast<Eigen::Index>(i)) = y[i];
  }
  Eigen::VectorXd p(3);
  p << *peak_it, 0.0, 1.0;

  Eigen::LevenbergMarquardt<GaussianResiduals> lm(functor);
  lm.parameters.xtol = 1e-8;
  lm.parameters.ftol = 1e-15;
  lm.parameters.maxfev = max_iterations;
  const auto status = lm.minimize(p);

  using Status = Eigen::LevenbergMarquardtSpace::Status;
  GaussianFit fit;
  fit.converged = status == Status::RelativeErrorTooSmall || status == Status::RelativeErrorAndReductionTooSmall ||
                  status == Status::RelativeReductionTooSmall || status == Status::CosinusTooSmall ||
                  status == Status::FtolTooSmall || status == Status::XtolTooSmall ||
                  status == Status::GtolTooSmall;
  fit.iterations = static_cast<int>(lm.iter);
  fit.amplitude = p(0);
  fit.center_hz = x_peak + p(1) * scale;
  fit.sigma_hz = std::abs(p(2)) * scale;

  Eigen::VectorXd residual(functor.u.size());
  functor(p, residual);
  fit.rms_residual = std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size()));
  fit.sigma_vr = fit.sigma_hz / constants::doppler_hz_per_vr;
  fit.sigma_m_per_s = fit.sigma_vr * constants::recoil_velocity;
  fit.temperature_uk = temperature_uk(fit.sigma_vr);
  return fit;
}

double temperature_uk(double sigma_vr) {
  const double v = sigma_vr * constants::recoil_velocity;
  return constants::cesium_mass * v * v / constants::boltzmann * 1e6;
}

VelocityResolution velocity_resolution(double fwhm_hz) {
  if (!(fwhm_hz > 0.0)) throw std::invalid_argument("FWHM must be > 0");
  const double vr = fwhm_hz / constants::doppler_hz_per_vr;
  return {vr, vr * constants::recoil_velocity};
}

}  // namespace pumpsim
