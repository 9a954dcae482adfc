#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>

#include "pumpsim/constants.hpp"

namespace pumpsim {

enum class Manifold { ground, excited };

/// One Zeeman sublevel of the cesium D2 line: 6S1/2 (ground, F=3,4) or
/// 6P3/2 (excited, F'=3,4,5).
struct SublevelLabel {
  Manifold manifold = Manifold::ground;
  int F = 4;
  int m = 0;

  static constexpr SublevelLabel ground(int F, int m) { return {Manifold::ground, F, m}; }
  static constexpr SublevelLabel excited(int F, int m) { return {Manifold::excited, F, m}; }

  bool is_ground() const { return manifold == Manifold::ground; }
  bool is_excited() const { return manifold == Manifold::excited; }

  /// Column-name form, e.g. "g4_m0", "e5_m-5".
  std::string name() const;

  friend constexpr auto operator<=>(const SublevelLabel&, const SublevelLabel&) = default;
};

/// Parses the name() form back into a label. Throws std::invalid_argument.
SublevelLabel parse_sublevel(std::string_view text);

inline constexpr std::size_t kNumGround = 7 + 9;
inline constexpr std::size_t kNumExcited = 7 + 9 + 11;
inline constexpr std::size_t kNumStates = kNumGround + kNumExcited;

/// Canonical ordering: g3 (m=-3..3), g4 (m=-4..4), e3, e4, e5.
std::span<const SublevelLabel, kNumStates> enumerate_states();

/// Dense index of a label. Throws std::invalid_argument for labels outside
/// the enumerated manifolds.
std::size_t index_of(const SublevelLabel& label);

bool is_valid(const SublevelLabel& label);

// Angular-momentum coupling coefficients. Arguments are doubled (2j, 2m) so
// half-integer momenta are exact integers.
double wigner_3j(int two_j1, int two_j2, int two_j3, int two_m1, int two_m2, int two_m3);
double wigner_6j(int two_j1, int two_j2, int two_j3, int two_j4, int two_j5, int two_j6);

/// Spontaneous-decay probabilities a(e -> g), normalized per excited
/// sublevel over the 16 ground sublevels.
class BranchingTable {
 public:
  static const BranchingTable& instance();

  /// Throws std::invalid_argument unless `from` is excited and `to` ground.
  double operator()(const SublevelLabel& from, const SublevelLabel& to) const;

  /// Indexed by (excited index - kNumGround, ground index).
  double at(std::size_t excited_offset, std::size_t ground_index) const {
    return table_[excited_offset][ground_index];
  }

  /// One row per excited sublevel, header row with the ground labels.
  void write_csv(std::ostream& os) const;

 private:
  BranchingTable();
  std::array<std::array<double, kNumGround>, kNumExcited> table_{};
};

double branching_ratio(const SublevelLabel& from, const SublevelLabel& to);

struct ZeemanParams {
  double g3 = constants::lande_g3;
  double g4 = constants::lande_g4;
  double bias_gauss = 0.0;
};

/// First-order position of the sigma+sigma+ Raman line g3,m <-> g4,m, Hz.
/// Throws std::invalid_argument for |m| > 3.
double raman_line_offset(int m, const ZeemanParams& params);

}  // namespace pumpsim
