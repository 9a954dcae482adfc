#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pumpsim/kinetics.hpp"

namespace pumpsim {

/// Counter-based generator: the k-th draw of stream s under seed is a pure
/// function of (seed, s, k), so per-trajectory streams do not depend on how
/// trajectories are scheduled across threads.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Isotropic unit vector.
  Eigen::Vector3d direction();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct RecoilGeometry {
  Eigen::Vector3d pb_axis{0.0, 0.0, 1.0};
  Eigen::Vector3d detection_axis{1.0, 0.0, 0.0};
  bool backreflected = true;

  /// Raman axis horizontal (x) along the bias field, polarizing beam in the
  /// orthogonal plane at 45 degrees to the horizontal, back-reflected.
  static RecoilGeometry setup_default();

  /// Throws std::invalid_argument unless both axes are unit vectors.
  void validate() const;
};

struct WalkOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  bool absorption = true;  // false: spontaneous-emission kicks only
  unsigned threads = 1;
};

struct HeatingResult {
  double mean_cycles = 0.0;
  double delta_vrms_axis = 0.0;  // v_r
  double standard_error = 0.0;   // of delta_vrms_axis, v_r
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::vector<double> projected;  // final velocity along the detection axis per trajectory, v_r
};

/// Random walk of `cycles` absorption + spontaneous-emission recoils.
HeatingResult recoil_walk(int cycles, const RecoilGeometry& geometry, const WalkOptions& options);

/// Each trajectory starts from a uniformly chosen entry of `cycle_counts` and
/// performs floor(c) or ceil(c) cycles with mean c.
HeatingResult recoil_walk_mixture(std::span<const double> cycle_counts, const RecoilGeometry& geometry,
                                  const WalkOptions& options);

struct CycleOptions {
  double threshold = 0.95;  // dark-state ground fraction counted as pumped
  double t_end = 5e-3;      // s
  double step_gamma = kDefaultStepGamma;
  bool prune = false;
};

struct CycleCounts {
  std::array<double, 9> per_sublevel{};  // starting in g4, m = -4..4
  std::array<bool, 9> reached{};
  double sublevel_average = 0.0;
  double uniform = 0.0;  // starting from the uniform F=4 distribution
  bool uniform_reached = false;
};

/// Photons scattered per atom before the (g4, m=0) ground fraction reaches the
/// threshold; photons at t_end when it never does.
CycleCounts expected_cycles(std::span<const BeamSpec> beams, double alpha, const CycleOptions& options = {});

struct HeatingSummary {
  CycleCounts cycles;
  HeatingResult walk;
  double initial_vrms = 0.0;
  double delta_vrms = 0.0;
  double final_vrms_quadrature = 0.0;
  double final_vrms_additive = 0.0;
};

HeatingSummary heating_summary(double initial_vrms, std::span<const BeamSpec> beams, double alpha,
                               const RecoilGeometry& geometry, const CycleOptions& cycle_options = {},
                               const WalkOptions& walk_options = {});

/// `v_over_vr, count` with bin centers.
void write_histogram(std::ostream& os, const HeatingResult& result, double bin_width = 0.25);

}  // namespace pumpsim
