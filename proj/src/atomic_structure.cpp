#include "pumpsim/atomic_structure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <stdexcept>
#include <string>

namespace pumpsim {

namespace {

constexpr std::array<SublevelLabel, kNumStates> make_states() {
  std::array<SublevelLabel, kNumStates> out{};
  std::size_t i = 0;
  for (int F : {3, 4}) {
    for (int m = -F; m <= F; ++m) out[i++] = SublevelLabel::ground(F, m);
  }
  for (int F : {3, 4, 5}) {
    for (int m = -F; m <= F; ++m) out[i++] = SublevelLabel::excited(F, m);
  }
  return out;
}

constexpr std::array<SublevelLabel, kNumStates> kStates = make_states();

// n! for the small arguments the coupling formulas need.
double factorial(int n) {
  static const auto table = [] {
    std::array<double, 64> t{};
    t[0] = 1.0;
    for (std::size_t k = 1; k < t.size(); ++k) t[k] = t[k - 1] * static_cast<double>(k);
    return t;
  }();
  if (n < 0 || n >= static_cast<int>(table.size())) {
    throw std::invalid_argument("factorial argument out of range: " + std::to_string(n));
  }
  return table[static_cast<std::size_t>(n)];
}

bool triangle(int two_a, int two_b, int two_c) {
  return two_c >= std::abs(two_a - two_b) && two_c <= two_a + two_b &&
         (two_a + two_b + two_c) % 2 == 0;
}

// Delta(abc) for doubled arguments already known to satisfy the triangle rule.
double triangle_coefficient(int two_a, int two_b, int two_c) {
  return std::sqrt(factorial((two_a + two_b - two_c) / 2) * factorial((two_a - two_b + two_c) / 2) *
                   factorial((-two_a + two_b + two_c) / 2) /
                   factorial((two_a + two_b + two_c) / 2 + 1));
}

}  // namespace

std::string SublevelLabel::name() const {
  return std::string(is_ground() ? "g" : "e") + std::to_string(F) + "_m" + std::to_string(m);
}

SublevelLabel parse_sublevel(std::string_view text) {
  auto fail = [&] { return std::invalid_argument("bad sublevel name '" + std::string(text) + "'"); };
  if (text.size() < 5 || (text[0] != 'g' && text[0] != 'e')) throw fail();
  const auto sep = text.find("_m");
  if (sep == std::string_view::npos) throw fail();
  SublevelLabel label;
  label.manifold = text[0] == 'g' ? Manifold::ground : Manifold::excited;
  try {
    std::size_t used = 0;
    const std::string f_part(text.substr(1, sep - 1));
    const std::string m_part(text.substr(sep + 2));
    label.F = std::stoi(f_part, &used);
    if (used != f_part.size()) throw fail();
    label.m = std::stoi(m_part, &used);
    if (used != m_part.size()) throw fail();
  } catch (const std::logic_error&) {
    throw fail();
  }
  if (!is_valid(label)) throw fail();
  return label;
}

std::span<const SublevelLabel, kNumStates> enumerate_states() { return kStates; }

bool is_valid(const SublevelLabel& label) {
  const bool f_ok = label.is_ground() ? (label.F == 3 || label.F == 4)
                                      : (label.F >= 3 && label.F <= 5);
  return f_ok && std::abs(label.m) <= label.F;
}

std::size_t index_of(const SublevelLabel& label) {
  if (!is_valid(label)) {
    throw std::invalid_argument("sublevel outside the state space: " + label.name());
  }
  std::size_t base = 0;
  if (label.is_ground()) {
    base = label.F == 3 ? 0 : 7;
  } else {
    base = kNumGround + (label.F == 3 ? 0 : label.F == 4 ? 7 : 16);
  }
  return base + static_cast<std::size_t>(label.m + label.F);
}

double wigner_3j(int two_j1, int two_j2, int two_j3, int two_m1, int two_m2, int two_m3) {
  if (two_m1 + two_m2 + two_m3 != 0) return 0.0;
  if (!triangle(two_j1, two_j2, two_j3)) return 0.0;
  if (std::abs(two_m1) > two_j1 || std::abs(two_m2) > two_j2 || std::abs(two_m3) > two_j3) return 0.0;
  if ((two_j1 + two_m1) % 2 != 0 || (two_j2 + two_m2) % 2 != 0 || (two_j3 + two_m3) % 2 != 0) {
    return 0.0;
  }
  // (j1 j2 j3; 0 0 0) vanishes identically for odd j1+j2+j3.
  if (two_m1 == 0 && two_m2 == 0 && ((two_j1 + two_j2 + two_j3) / 2) % 2 != 0) return 0.0;

  const int j1pm1 = (two_j1 + two_m1) / 2, j1mm1 = (two_j1 - two_m1) / 2;
  const int j2pm2 = (two_j2 + two_m2) / 2, j2mm2 = (two_j2 - two_m2) / 2;
  const int j3pm3 = (two_j3 + two_m3) / 2, j3mm3 = (two_j3 - two_m3) / 2;

  const int a = (two_j3 - two_j2 + two_m1) / 2;  // j3 - j2 + m1
  const int b = (two_j3 - two_j1 - two_m2) / 2;  // j3 - j1 - m2
  const int c = (two_j1 + two_j2 - two_j3) / 2;  // j1 + j2 - j3
  const int k_min = std::max({0, -a, -b});
  const int k_max = std::min({c, j1mm1, j2pm2});

  double sum = 0.0;
  for (int k = k_min; k <= k_max; ++k) {
    const double term = 1.0 / (factorial(k) * factorial(a + k) * factorial(b + k) *
                               factorial(c - k) * factorial(j1mm1 - k) * factorial(j2pm2 - k));
    sum += (k % 2 == 0) ? term : -term;
  }
  const int phase = (two_j1 - two_j2 - two_m3) / 2;
  const double norm = triangle_coefficient(two_j1, two_j2, two_j3) *
                      std::sqrt(factorial(j1pm1) * factorial(j1mm1) * factorial(j2pm2) *
                                factorial(j2mm2) * factorial(j3pm3) * factorial(j3mm3));
  const double value = norm * sum;
  return (std::abs(phase) % 2 == 0) ? value : -value;
}

double wigner_6j(int two_j1, int two_j2, int two_j3, int two_j4, int two_j5, int two_j6) {
  if (!triangle(two_j1, two_j2, two_j3) || !triangle(two_j1, two_j5, two_j6) ||
      !triangle(two_j4, two_j2, two_j6) || !triangle(two_j4, two_j5, two_j3)) {
    return 0.0;
  }
  const int a1 = (two_j1 + two_j2 + two_j3) / 2;
  const int a2 = (two_j1 + two_j5 + two_j6) / 2;
  const int a3 = (two_j4 + two_j2 + two_j6) / 2;
  const int a4 = (two_j4 + two_j5 + two_j3) / 2;
  const int b1 = (two_j1 + two_j2 + two_j4 + two_j5) / 2;
  const int b2 = (two_j2 + two_j3 + two_j5 + two_j6) / 2;
  const int b3 = (two_j3 + two_j1 + two_j6 + two_j4) / 2;
  const int t_min = std::max({a1, a2, a3, a4});
  const int t_max = std::min({b1, b2, b3});

  double sum = 0.0;
  for (int t = t_min; t <= t_max; ++t) {
    const double term = factorial(t + 1) /
                        (factorial(t - a1) * factorial(t - a2) * factorial(t - a3) *
                         factorial(t - a4) * factorial(b1 - t) * factorial(b2 - t) * factorial(b3 - t));
    sum += (t % 2 == 0) ? term : -term;
  }
  return triangle_coefficient(two_j1, two_j2, two_j3) * triangle_coefficient(two_j1, two_j5, two_j6) *
         triangle_coefficient(two_j4, two_j2, two_j6) * triangle_coefficient(two_j4, two_j5, two_j3) *
         sum;
}

BranchingTable::BranchingTable() {
  constexpr int two_i = static_cast<int>(2 * constants::nuclear_spin);
  constexpr int two_jg = static_cast<int>(2 * constants::ground_j);
  constexpr int two_je = static_cast<int>(2 * constants::excited_j);
  const auto states = enumerate_states();

  for (std::size_t e = 0; e < kNumExcited; ++e) {
    const SublevelLabel& ex = states[kNumGround + e];
    double total = 0.0;
    for (std::size_t g = 0; g < kNumGround; ++g) {
      const SublevelLabel& gr = states[g];
      const int q = ex.m - gr.m;
      double value = 0.0;
      if (std::abs(q) <= 1) {
        const double six = wigner_6j(two_jg, two_je, 2, 2 * ex.F, 2 * gr.F, two_i);
        const double three = wigner_3j(2 * gr.F, 2, 2 * ex.F, 2 * gr.m, 2 * q, -2 * ex.m);
        value = (two_je + 1) * (2 * gr.F + 1) * (2 * ex.F + 1) * six * six * three * three;
      }
      table_[e][g] = value;
      total += value;
    }
    for (auto& v : table_[e]) v /= total;
  }
}

const BranchingTable& BranchingTable::instance() {
  static const BranchingTable table;
  return table;
}

double BranchingTable::operator()(const SublevelLabel& from, const SublevelLabel& to) const {
  if (!from.is_excited() || !to.is_ground()) {
    throw std::invalid_argument("branching ratio needs an excited and a ground sublevel, got " +
                                from.name() + " -> " + to.name());
  }
  return table_[index_of(from) - kNumGround][index_of(to)];
}

void BranchingTable::write_csv(std::ostream& os) const {
  const auto states = enumerate_states();
  os << "excited";
  for (std::size_t g = 0; g < kNumGround; ++g) os << ", " << states[g].name();
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t e = 0; e < kNumExcited; ++e) {
    os << states[kNumGround + e].name();
    for (std::size_t g = 0; g < kNumGround; ++g) os << ", " << table_[e][g];
    os << '\n';
  }
  os.precision(old_precision);
}

double branching_ratio(const SublevelLabel& from, const SublevelLabel& to) {
  return BranchingTable::instance()(from, to);
}

double raman_line_offset(int m, const ZeemanParams& params) {
  if (std::abs(m) > 3) {
    throw std::invalid_argument("Raman line index |m| must be <= 3, got " + std::to_string(m));
  }
  return m * (params.g4 - params.g3) * constants::bohr_hz_per_gauss * params.bias_gauss;
}

}  // namespace pumpsim
