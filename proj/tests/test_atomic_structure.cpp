#include <cmath>
#include <set>
#include <sstream>

#include <gsl/gsl_sf_coupling.h>

#include "doctest.h"
#include "pumpsim/atomic_structure.hpp"

using namespace pumpsim;

namespace {

// Dipole emission strength |<F m| d_q |F' m'>|^2 summed over q, built in the
// decoupled |J mJ>|I mI> basis from Clebsch-Gordan coefficients. No 6j symbol
// is involved, so this route is independent of the library's.
double clebsch(int tj1, int tm1, int tj2, int tm2, int tJ, int tM) {
  const int phase = (tj1 - tj2 + tM) / 2;
  return ((phase % 2 == 0) ? 1.0 : -1.0) * std::sqrt(tJ + 1.0) *
         gsl_sf_coupling_3j(tj1, tj2, tJ, tm1, tm2, -tM);
}

double decoupled_strength(const SublevelLabel& e, const SublevelLabel& g) {
  const int tJg = 1;
  const int tJe = 3;
  const int tI = 7;
  double total = 0.0;
  for (int tq = -2; tq <= 2; tq += 2) {
    double amp = 0.0;
    for (int tmI = -tI; tmI <= tI; tmI += 2) {
      const int tmJg = 2 * g.m - tmI;
      const int tmJe = 2 * e.m - tmI;
      if (std::abs(tmJg) > tJg || std::abs(tmJe) > tJe) continue;
      if (tmJe != tmJg + tq) continue;
      // <Jg mJg| d_q |Je mJe> up to a reduced element common to every pair.
      const double dipole = clebsch(tJg, tmJg, 2, tq, tJe, tmJe);
      amp += clebsch(tJg, tmJg, tI, tmI, 2 * g.F, 2 * g.m) * clebsch(tJe, tmJe, tI, tmI, 2 * e.F, 2 * e.m) * dipole;
    }
    total += amp * amp;
  }
  return total;
}

}  // namespace

TEST_CASE("state space has 16 ground and 27 excited sublevels in canonical order") {
  const auto states = enumerate_states();
  CHECK(states.size() == 43);
  int ground = 0;
  int excited = 0;
  for (const auto& s : states) {
    (s.is_ground() ? ground : excited) += 1;
    CHECK(std::abs(s.m) <= s.F);
  }
  CHECK(ground == 16);
  CHECK(excited == 27);
  CHECK(states.front() == SublevelLabel::ground(3, -3));
  CHECK(states[7] == SublevelLabel::ground(4, -4));
  CHECK(states[16] == SublevelLabel::excited(3, -3));
  CHECK(states.back() == SublevelLabel::excited(5, 5));
}

TEST_CASE("dense index round-trips and names parse back") {
  const auto states = enumerate_states();
  std::set<std::string> names;
  for (std::size_t i = 0; i < states.size(); ++i) {
    CHECK(index_of(states[i]) == i);
    CHECK(parse_sublevel(states[i].name()) == states[i]);
    names.insert(states[i].name());
  }
  CHECK(names.size() == 43);
  CHECK(states[index_of(SublevelLabel::ground(4, 0))].name() == "g4_m0");
  CHECK_THROWS_AS(index_of(SublevelLabel::ground(5, 0)), std::invalid_argument);
  CHECK_THROWS_AS(index_of(SublevelLabel::excited(2, 0)), std::invalid_argument);
  CHECK_THROWS_AS(index_of(SublevelLabel::ground(3, 4)), std::invalid_argument);
  CHECK_THROWS_AS(parse_sublevel("x4_m0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sublevel("g4_m"), std::invalid_argument);
  CHECK_FALSE(is_valid(SublevelLabel::excited(5, 6)));
}

TEST_CASE("Wigner symbols agree with GSL") {
  for (int tj1 = 0; tj1 <= 8; ++tj1) {
    for (int tj2 = 0; tj2 <= 4; ++tj2) {
      for (int tj3 = std::abs(tj1 - tj2); tj3 <= tj1 + tj2; tj3 += 2) {
        for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2) {
          for (int tm2 = -tj2; tm2 <= tj2; tm2 += 2) {
            const int tm3 = -tm1 - tm2;
            if (std::abs(tm3) > tj3) continue;
            CHECK(wigner_3j(tj1, tj2, tj3, tm1, tm2, tm3) ==
                  doctest::Approx(gsl_sf_coupling_3j(tj1, tj2, tj3, tm1, tm2, tm3)).epsilon(1e-12));
          }
        }
      }
    }
  }
  // {J J' 1; F' F I} for every D2 hyperfine pair.
  for (int tF = 6; tF <= 8; tF += 2) {
    for (int tFp = 4; tFp <= 10; tFp += 2) {
      CHECK(wigner_6j(1, 3, 2, tFp, tF, 7) ==
            doctest::Approx(gsl_sf_coupling_6j(1, 3, 2, tFp, tF, 7)).epsilon(1e-12));
    }
  }
  CHECK(wigner_3j(2, 2, 2, 0, 0, 0) == 0.0);
  CHECK(wigner_3j(8, 2, 8, 0, 0, 0) == 0.0);
}

TEST_CASE("branching ratios match the decoupled-basis oracle") {
  const auto states = enumerate_states();
  const auto& table = BranchingTable::instance();
  for (std::size_t ei = kNumGround; ei < kNumStates; ++ei) {
    double norm = 0.0;
    for (std::size_t gi = 0; gi < kNumGround; ++gi) norm += decoupled_strength(states[ei], states[gi]);
    double sum = 0.0;
    for (std::size_t gi = 0; gi < kNumGround; ++gi) {
      const double a = table(states[ei], states[gi]);
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
      CHECK(std::abs(a - decoupled_strength(states[ei], states[gi]) / norm) < 1e-12);
      sum += a;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("branching selection rules, mirror symmetry and anchors") {
  const auto states = enumerate_states();
  for (std::size_t ei = kNumGround; ei < kNumStates; ++ei) {
    for (std::size_t gi = 0; gi < kNumGround; ++gi) {
      const auto& e = states[ei];
      const auto& g = states[gi];
      const double a = branching_ratio(e, g);
      if (std::abs(e.m - g.m) > 1 || std::abs(e.F - g.F) > 1) CHECK(a == 0.0);
      CHECK(a == doctest::Approx(branching_ratio(SublevelLabel::excited(e.F, -e.m),
                                                 SublevelLabel::ground(g.F, -g.m))).epsilon(1e-13));
    }
  }
  CHECK(branching_ratio(SublevelLabel::excited(4, 0), SublevelLabel::ground(4, 0)) == 0.0);
  CHECK(branching_ratio(SublevelLabel::excited(5, 5), SublevelLabel::ground(4, 4)) == doctest::Approx(1.0).epsilon(1e-12));
  // pi decays within F'=4 -> F=4 scale as m^2.
  const double a1 = branching_ratio(SublevelLabel::excited(4, 1), SublevelLabel::ground(4, 1));
  const double a4 = branching_ratio(SublevelLabel::excited(4, 4), SublevelLabel::ground(4, 4));
  CHECK(a4 / a1 == doctest::Approx(16.0).epsilon(1e-12));
  CHECK_THROWS_AS(branching_ratio(SublevelLabel::ground(4, 0), SublevelLabel::ground(4, 0)), std::invalid_argument);
  CHECK_THROWS_AS(branching_ratio(SublevelLabel::excited(4, 0), SublevelLabel::excited(4, 0)), std::invalid_argument);
}

TEST_CASE("branching table dump has one row per excited sublevel") {
  std::ostringstream os;
  BranchingTable::instance().write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0;
  std::getline(is, line);
  CHECK(line.rfind("excited, g3_m-3", 0) == 0);
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 27);
}

TEST_CASE("Raman line offsets") {
  const ZeemanParams p{-0.25, 0.25, 0.1};
  // (g4 - g3) * mu_B / h * B from the SI constants directly.
  const double expected = 0.5 * 9.2740100783e-24 / 6.62607015e-34 * 0.1e-4;
  CHECK(raman_line_offset(1, p) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(raman_line_offset(1, p) == doctest::Approx(69.98e3).epsilon(1e-4));
  CHECK(raman_line_offset(0, ZeemanParams{-0.25, 0.25, 7.0}) == 0.0);
  for (int m = 1; m <= 3; ++m) {
    CHECK(raman_line_offset(-m, p) == -raman_line_offset(m, p));
    CHECK(raman_line_offset(m, p) == doctest::Approx(m * raman_line_offset(1, p)).epsilon(1e-14));
  }
  CHECK(raman_line_offset(2, ZeemanParams{-0.25, 0.25, 0.2}) ==
        doctest::Approx(2.0 * raman_line_offset(2, p)).epsilon(1e-14));
  CHECK_THROWS_AS(raman_line_offset(4, p), std::invalid_argument);
}
