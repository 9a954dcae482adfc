#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "pumpsim/config.hpp"
#include "pumpsim/error.hpp"

using namespace pumpsim;

namespace {

ScenarioConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is, "test.ini");
}

}  // namespace

TEST_CASE("full document") {
  const auto c = parse(
      "# scenario\n"
      "[constants]\n"
      "laser_linewidth_hz = 1.5e6\n"
      "[beams.pb]\n"
      "target = 4->4'\n"
      "intensity_ratio = 0.019   # inline comment\n"
      "detuning_gamma = -0.5\n"
      "alpha = 0.013\n"
      "[beams.rep]\n"
      "target = 3->4\n"
      "intensity_ratio = 0.023\n"
      "alpha = 0.013\n"
      "[pulse]\n"
      "tau_s = 7e-3\n"
      "geometry = counterpropagating\n"
      "[field]\n"
      "bias_gauss = 0.1\n"
      "rms_fluct_gauss = 3e-4\n"
      "[velocity]\n"
      "sigma_vr = 4.8\n"
      "[integration]\n"
      "dt_gamma = 0.005\n"
      "t_end_s = 2e-3\n"
      "initial = g4_m2\n"
      "[mc]\n"
      "samples = 5000\n"
      "seed = 18446744073709551615\n"
      "threads = 3\n"
      "[recoil]\n"
      "pb_axis = 0, 2, 0\n"
      "[output]\n"
      "directory = out/x\n");
  REQUIRE(c.beams.size() == 2);
  CHECK(c.beams[0].name == "pb");
  CHECK(c.beams[0].beam.intensity_ratio == 0.019);
  CHECK(c.beams[1].beam.target == HyperfineTransition{3, 4});
  CHECK(c.common_alpha() == 0.013);
  const auto specs = c.beam_specs();
  CHECK(specs[0].linewidth == doctest::Approx(constants::two_pi * 1.5e6));
  CHECK(specs[0].polarization.plus == polarization_weights(0.013).plus);
  CHECK(c.pulse().geometry == Geometry::counterpropagating);
  CHECK(c.pulse().rabi_frequency == doctest::Approx(constants::pi / 7e-3));
  CHECK(c.zeeman().bias_gauss == 0.1);
  CHECK(c.initial_populations()(static_cast<Eigen::Index>(index_of(SublevelLabel::ground(4, 2)))) == 1.0);
  CHECK(c.seed == 18446744073709551615ULL);
  CHECK(c.threads == 3);
  CHECK(c.recoil.pb_axis.y() == doctest::Approx(1.0));
  CHECK(c.directory == std::filesystem::path("out/x"));
}

TEST_CASE("errors name the offending key") {
  CHECK_THROWS_WITH_AS(parse("[pulse]\ntau = 1\n"), doctest::Contains("tau"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[pulse]\ntau_s = -1\n"), doctest::Contains("tau_s"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[pulse]\ntau_s = 1ms\n"), doctest::Contains("tau_s"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[pulse]\ngeometry = sideways\n"), doctest::Contains("geometry"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[beams.pb]\ntarget = 4->4\nintensity_ratio = -2\n"),
                       doctest::Contains("intensity_ratio"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[beams.pb]\ntarget = 4->7\n"), doctest::Contains("target"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[beams.pb]\nintensity_ratio = 1\n"), doctest::Contains("target"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[beams.pb]\ntarget = 4->4\ncolor = red\n"), doctest::Contains("color"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[laser]\npower = 1\n"), doctest::Contains("laser"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[mc]\nsamples = 0\n"), doctest::Contains("samples"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[mc]\nthreshold = 1.5\n"), doctest::Contains("threshold"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[integration]\ndt_gamma = 0.5\n"), doctest::Contains("dt_gamma"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[integration]\ninitial = e4_m0\n"), doctest::Contains("initial"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[recoil]\npb_axis = 1, 0\n"), doctest::Contains("pb_axis"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("[pulse]\ntau_s = 1\ntau_s = 2\n"), doctest::Contains("test.ini:3"), ConfigError);
  CHECK_THROWS_WITH_AS(parse("tau_s = 1\n"), doctest::Contains("tau_s"), ConfigError);
  const auto c = parse("[beams.a]\ntarget = 4->4\nalpha = 0.01\n[beams.b]\ntarget = 3->4\nalpha = 0.02\n");
  CHECK_THROWS_WITH_AS(c.common_alpha(), doctest::Contains("alpha"), ConfigError);
}

TEST_CASE("defaults") {
  const auto c = parse("");
  CHECK(c.beams.empty());
  CHECK(c.dt_gamma == kDefaultStepGamma);
  CHECK(c.t_end_s == 5e-3);
  CHECK(c.samples == 100000);
  CHECK(c.threshold == 0.95);
  CHECK(c.initial_populations().isApprox(uniform_f4_populations()));
}

TEST_CASE("shipped scenarios parse") {
  const std::filesystem::path dir = SCENARIO_DIR;
  for (const char* name : {"copropagating_polarized", "velocimetry", "pumping_dynamics", "unpolarized_widths", "heating"}) {
    CAPTURE(name);
    CHECK_NOTHROW(load_config(dir / (std::string(name) + ".ini")));
  }
  const auto pumping = load_config(dir / "pumping_dynamics.ini");
  REQUIRE(pumping.beams.size() == 2);
  CHECK(pumping.beams[0].beam.intensity_ratio == 0.019);
  CHECK(pumping.beams[1].beam.intensity_ratio == 0.023);
  CHECK(pumping.common_alpha() == 0.013);
  CHECK_THROWS_AS(load_config(dir / "missing.ini"), ConfigError);
}
