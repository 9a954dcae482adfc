#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "pumpsim/kinetics.hpp"
#include "pumpsim/raman.hpp"

using namespace pumpsim;

namespace {

std::vector<double> pops_of(const Populations& n) { return {n.data(), n.data() + n.size()}; }

std::vector<double> dark_pops() { return pops_of(single_sublevel_populations(SublevelLabel::ground(4, 0))); }

double area(const Spectrum& s) {
  double a = 0.0;
  for (std::size_t i = 1; i < s.signal.size(); ++i) {
    a += 0.5 * (s.signal[i] + s.signal[i - 1]) * (s.detuning_hz[i] - s.detuning_hz[i - 1]);
  }
  return a;
}

double area_between(const Spectrum& s, double lo, double hi) {
  double a = 0.0;
  for (std::size_t i = 1; i < s.signal.size(); ++i) {
    if (s.detuning_hz[i - 1] < lo || s.detuning_hz[i] > hi) continue;
    a += 0.5 * (s.signal[i] + s.signal[i - 1]) * (s.detuning_hz[i] - s.detuning_hz[i - 1]);
  }
  return a;
}

}  // namespace

TEST_CASE("Rabi lineshape") {
  const auto pulse = RamanPulse::pi_pulse(7e-3, Geometry::copropagating);
  CHECK(rabi_lineshape(0.0, pulse) == doctest::Approx(1.0).epsilon(1e-15));
  for (double d : {1.0, 37.5, 114.0, 900.0}) {
    const double p = rabi_lineshape(d, pulse);
    CHECK(p == rabi_lineshape(-d, pulse));
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  // Closed form away from resonance.
  const double delta = constants::two_pi * 80.0;
  const double om = pulse.rabi_frequency;
  const double w = std::sqrt(om * om + delta * delta);
  CHECK(rabi_lineshape(80.0, pulse) ==
        doctest::Approx(om * om / (w * w) * std::pow(std::sin(w * pulse.duration / 2.0), 2)).epsilon(1e-13));
}

TEST_CASE("Fourier-limited width of a pi pulse") {
  for (double tau : {1e-3, 7e-3, 20e-3}) {
    const auto pulse = RamanPulse::pi_pulse(tau, Geometry::copropagating);
    const double fwhm = rabi_fwhm(pulse);
    CHECK(fwhm * tau == doctest::Approx(0.7987).epsilon(0.005 / 0.7987));
    CHECK(rabi_lineshape(fwhm / 2.0, pulse) == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("copropagating spectrum reads populations") {
  const auto pulse = RamanPulse::pi_pulse(7e-3, Geometry::copropagating);
  const ZeemanParams field{-0.25, 0.25, 0.1};
  const auto grid = detuning_grid(250e3, 5.0);
  const auto single = synth_copropagating(dark_pops(), field, pulse, grid);
  CHECK(measure_fwhm(single) * 7e-3 == doctest::Approx(0.7987).epsilon(1e-2));
  const auto peak = std::max_element(single.signal.begin(), single.signal.end()) - single.signal.begin();
  CHECK(single.detuning_hz[static_cast<std::size_t>(peak)] == 0.0);

  // 2:1 mixture of m=0 and m=2: line areas in the same ratio.
  Populations n = Populations::Zero(kNumStates);
  n(static_cast<Eigen::Index>(index_of(SublevelLabel::ground(4, 0)))) = 2.0 / 3.0;
  n(static_cast<Eigen::Index>(index_of(SublevelLabel::ground(4, 2)))) = 1.0 / 3.0;
  const auto mix = synth_copropagating(pops_of(n), field, pulse, grid);
  const double off2 = raman_line_offset(2, field);
  const double a0 = area_between(mix, -20e3, 20e3);
  const double a2 = area_between(mix, off2 - 20e3, off2 + 20e3);
  CHECK(a0 / a2 == doctest::Approx(2.0).epsilon(1e-3));

  // Linearity over single-sublevel spectra.
  Spectrum sum;
  sum.signal.assign(grid.size(), 0.0);
  for (int m = -3; m <= 3; ++m) {
    const auto s = synth_copropagating(pops_of(single_sublevel_populations(SublevelLabel::ground(4, m))), field, pulse, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) sum.signal[i] += s.signal[i] / 9.0;
  }
  const auto uniform = synth_copropagating(pops_of(uniform_f4_populations()), field, pulse, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(std::abs(uniform.signal[i] - sum.signal[i]) < 1e-6);

  // Zero field: all lines coincide and keep the single-line width.
  const auto degenerate = synth_copropagating(pops_of(uniform_f4_populations()), ZeemanParams{}, pulse, detuning_grid(2e3, 1.0));
  CHECK(measure_fwhm(degenerate) == doctest::Approx(rabi_fwhm(pulse)).epsilon(5e-3));

  const auto counter = RamanPulse::pi_pulse(7e-3, Geometry::counterpropagating);
  CHECK_THROWS_AS(synth_copropagating(dark_pops(), field, counter, grid), std::invalid_argument);
}

TEST_CASE("field fluctuations broaden only the m != 0 lines") {
  const auto pulse = RamanPulse::pi_pulse(7e-3, Geometry::copropagating);
  const ZeemanParams field{-0.25, 0.25, 0.1};
  CopropagatingOptions noisy;
  noisy.field_rms_gauss = 300e-6;
  const auto grid = detuning_grid(2e3, 1.0);
  const auto quiet0 = synth_copropagating(dark_pops(), field, pulse, grid);
  const auto noisy0 = synth_copropagating(dark_pops(), field, pulse, grid, noisy);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(quiet0.signal[i] == noisy0.signal[i]);

  const auto one = pops_of(single_sublevel_populations(SublevelLabel::ground(4, 1)));
  const double off = raman_line_offset(1, field);
  const auto grid1 = detuning_grid(2e3, 1.0);
  std::vector<double> shifted(grid1);
  for (auto& d : shifted) d += off;
  const auto quiet1 = synth_copropagating(one, field, pulse, shifted);
  const auto noisy1 = synth_copropagating(one, field, pulse, shifted, noisy);
  CHECK(measure_fwhm(noisy1) > measure_fwhm(quiet1));
}

TEST_CASE("Doppler conversion") {
  CHECK(doppler_shift(1.0) == doctest::Approx(8272.0).epsilon(2e-4));
  CHECK(doppler_shift(1.0) == doctest::Approx(8.27e3).epsilon(1e-3));
  CHECK(doppler_shift(0.0) == 0.0);
  CHECK(doppler_shift(3.0, Geometry::copropagating) == 0.0);
  CHECK(doppler_shift(-2.5) == doctest::Approx(-2.5 * doppler_shift(1.0)).epsilon(1e-15));
  // v_r from hbar k / M, independent arithmetic.
  const double vr = 6.62607015e-34 / (852e-9 * 2.20694650e-25);
  CHECK(doppler_shift(1.0) == doctest::Approx(2.0 * vr / 852e-9).epsilon(1e-12));
  for (double v : {0.01, 1.0, 4.8, 123.0}) {
    CHECK(velocity_resolution(doppler_shift(v)).vr == doctest::Approx(v).epsilon(1e-12));
  }
  CHECK(velocity_resolution(doppler_shift(1.0)).vr == doctest::Approx(1.0).epsilon(1e-15));
  const auto r = velocity_resolution(160.0);
  CHECK(r.vr == doctest::Approx(0.0193).epsilon(2e-3));
  CHECK(r.m_per_s * 1e6 == doctest::Approx(68.0).epsilon(5e-3));
  CHECK_THROWS_AS(velocity_resolution(0.0), std::invalid_argument);
}

TEST_CASE("counterpropagating spectrum: Doppler-limited widths") {
  const auto pulse = RamanPulse::pi_pulse(1e-3, Geometry::counterpropagating);
  const auto grid = detuning_grid(250e3, 250.0);
  for (double sigma : {4.0, 4.8}) {
    const auto s = synth_counterpropagating(dark_pops(), {sigma, 0.0}, pulse, grid);
    const double gaussian_fwhm = 2.0 * std::sqrt(2.0 * std::log(2.0)) * sigma * doppler_shift(1.0);
    CHECK(measure_fwhm(s) == doctest::Approx(gaussian_fwhm).epsilon(1e-2));
    const auto fit = fit_gaussian(s);
    CHECK(fit.converged);
    CHECK(fit.sigma_vr == doctest::Approx(sigma).epsilon(1e-2));
  }
  CHECK(2.0 * std::sqrt(2.0 * std::log(2.0)) * 4.0 * doppler_shift(1.0) == doctest::Approx(77.9e3).epsilon(1e-3));
  CHECK(2.0 * std::sqrt(2.0 * std::log(2.0)) * 4.8 * doppler_shift(1.0) == doctest::Approx(93.5e3).epsilon(1e-3));
  CHECK_THROWS_AS(synth_counterpropagating(dark_pops(), {-1.0, 0.0}, pulse, grid), std::invalid_argument);
  const auto co = RamanPulse::pi_pulse(1e-3, Geometry::copropagating);
  CHECK_THROWS_AS(synth_counterpropagating(dark_pops(), {1.0, 0.0}, co, grid), std::invalid_argument);
}

TEST_CASE("convolution never narrows the line and recovers it as sigma -> 0") {
  const auto co = RamanPulse::pi_pulse(1e-3, Geometry::copropagating);
  const auto counter = RamanPulse::pi_pulse(1e-3, Geometry::counterpropagating);
  const auto grid = detuning_grid(20e3, 10.0);
  const double base = measure_fwhm(synth_copropagating(dark_pops(), {}, co, grid));
  double previous = 0.0;
  for (double sigma : {0.0, 1e-3, 0.02, 0.1, 0.5}) {
    const double w = measure_fwhm(synth_counterpropagating(dark_pops(), {sigma, 0.0}, counter, grid));
    CHECK(w >= base * (1.0 - 1e-3));
    CHECK(w >= previous * (1.0 - 1e-3));
    previous = w;
    if (sigma <= 1e-3) CHECK(w == doctest::Approx(base).epsilon(2e-3));
  }
}

TEST_CASE("Gaussian limit: fitted sigma matches the input when Doppler dominates") {
  const auto counter = RamanPulse::pi_pulse(7e-3, Geometry::counterpropagating);
  // Fourier FWHM ~114 Hz; Doppler FWHM of 0.2 v_r is ~3.9 kHz (34x).
  const auto s = synth_counterpropagating(dark_pops(), {0.2, 0.0}, counter, detuning_grid(12e3, 20.0));
  const auto fit = fit_gaussian(s);
  CHECK(fit.sigma_vr == doctest::Approx(0.2).epsilon(1e-2));
}

TEST_CASE("Gaussian fit recovers parameters") {
  Spectrum s;
  s.detuning_hz = detuning_grid(100e3, 500.0);
  for (double x : s.detuning_hz) s.signal.push_back(0.7 * std::exp(-std::pow(x - 3e3, 2) / (2.0 * 2.1e4 * 2.1e4)));
  const auto fit = fit_gaussian(s);
  CHECK(fit.converged);
  CHECK(fit.center_hz == doctest::Approx(3e3).epsilon(1e-3));
  CHECK(fit.sigma_hz == doctest::Approx(2.1e4).epsilon(1e-3));
  CHECK(fit.amplitude == doctest::Approx(0.7).epsilon(1e-3));
  CHECK(fit.rms_residual < 1e-6);
  CHECK(fit.temperature_uk == doctest::Approx(temperature_uk(fit.sigma_vr)).epsilon(1e-12));

  // 1% uniform additive noise, 100 seeds: sigma within 2%.
  int within = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    Spectrum noisy = s;
    for (auto& y : noisy.signal) y = std::max(0.0, y + u(rng));
    if (std::abs(fit_gaussian(noisy).sigma_hz / 2.1e4 - 1.0) < 0.02) ++within;
  }
  CHECK(within == 100);

  Spectrum tiny;
  tiny.detuning_hz = {0, 1, 2};
  tiny.signal = {0, 1, 0};
  CHECK_THROWS_AS(fit_gaussian(tiny), std::invalid_argument);
}

TEST_CASE("temperature conversion") {
  CHECK(temperature_uk(4.0) == doctest::Approx(3.2).epsilon(0.03));
  CHECK(temperature_uk(4.8) == doctest::Approx(4.6).epsilon(0.03));
  const double vr = 6.62607015e-34 / (852e-9 * 2.20694650e-25);
  CHECK(temperature_uk(1.0) == doctest::Approx(2.20694650e-25 * vr * vr / 1.380649e-23 * 1e6).epsilon(1e-12));
}

TEST_CASE("spectrum export and grid") {
  const auto grid = detuning_grid(10.0, 2.5);
  CHECK(grid.size() == 9);
  CHECK(grid.front() == -10.0);
  CHECK(grid.back() == 10.0);
  const auto pulse = RamanPulse::pi_pulse(7e-3, Geometry::copropagating);
  const auto s = synth_copropagating(dark_pops(), {}, pulse, grid);
  std::ostringstream os;
  const std::vector<std::pair<std::string, std::string>> report{{"fwhm_hz", "114"}};
  s.write_csv(os, report);
  CHECK(os.str().rfind("detuning_hz, signal\n", 0) == 0);
  CHECK(os.str().find("# fwhm_hz=114\n") != std::string::npos);
  RamanPulse bad = pulse;
  bad.duration = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
