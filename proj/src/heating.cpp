#include "pumpsim/heating.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace pumpsim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31U);
}

// Runs body(i) for i in [0, n) over `threads` contiguous chunks.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  threads = std::max(1U, threads);
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([=] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
}

// Fills rms and its standard error from the per-trajectory projections,
// summing in index order.
void summarize(HeatingResult& result) {
  const auto n = static_cast<double>(result.projected.size());
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : result.projected) {
    const double v2 = v * v;
    s1 += v2;
    s2 += v2 * v2;
  }
  const double mean_v2 = s1 / n;
  result.delta_vrms_axis = std::sqrt(mean_v2);
  const double var_v2 = n > 1 ? std::max(0.0, (s2 - n * mean_v2 * mean_v2) / (n - 1.0)) : 0.0;
  result.standard_error =
      result.delta_vrms_axis > 0.0 ? std::sqrt(var_v2 / n) / (2.0 * result.delta_vrms_axis) : 0.0;
}

// Velocity along the detection axis after `cycles` absorption/emission pairs, v_r.
double walk_one(CounterRng& rng, int cycles, const RecoilGeometry& geometry, bool absorption) {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  for (int c = 0; c < cycles; ++c) {
    if (absorption) {
      const double sign = (!geometry.backreflected || rng.uniform() < 0.5) ? 1.0 : -1.0;
      v += sign * geometry.pb_axis;
    }
    v += rng.direction();
  }
  return v.dot(geometry.detection_axis);
}

void check_walk(const RecoilGeometry& geometry, const WalkOptions& options) {
  geometry.validate();
  if (options.samples < 1) throw std::invalid_argument("recoil walk needs at least one sample");
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL))) {}

std::uint64_t CounterRng::next() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() { return static_cast<double>(next() >> 11U) * 0x1.0p-53; }

Eigen::Vector3d CounterRng::direction() {
  const double cos_theta = 2.0 * uniform() - 1.0;
  const double phi = constants::two_pi * uniform();
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  return {sin_theta * std::cos(phi), sin_theta * std::sin(phi), cos_theta};
}

RecoilGeometry RecoilGeometry::setup_default() {
  const double h = std::sqrt(0.5);
  return {Eigen::Vector3d(0.0, h, h), Eigen::Vector3d(1.0, 0.0, 0.0), true};
}

void RecoilGeometry::validate() const {
  if (std::abs(pb_axis.norm() - 1.0) > 1e-12 || std::abs(detection_axis.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("recoil geometry axes must be unit vectors");
  }
}

HeatingResult recoil_walk(int cycles, const RecoilGeometry& geometry, const WalkOptions& options) {
  check_walk(geometry, options);
  if (cycles < 0) throw std::invalid_argument("cycle count must be >= 0");
  HeatingResult result;
  result.mean_cycles = cycles;
  result.samples = options.samples;
  result.seed = options.seed;
  result.projected.resize(options.samples);
  parallel_for(options.samples, options.threads, [&](std::size_t i) {
    CounterRng rng(options.seed, i);
    result.projected[i] = walk_one(rng, cycles, geometry, options.absorption);
  });
  summarize(result);
  return result;
}

HeatingResult recoil_walk_mixture(std::span<const double> cycle_counts, const RecoilGeometry& geometry,
                                  const WalkOptions& options) {
  check_walk(geometry, options);
  if (cycle_counts.empty()) throw std::invalid_argument("no cycle counts given");
  for (double c : cycle_counts) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("cycle counts must be >= 0");
  }
  HeatingResult result;
  double mean = 0.0;
  for (double c : cycle_counts) mean += c;
  result.mean_cycles = mean / static_cast<double>(cycle_counts.size());
  result.samples = options.samples;
  result.seed = options.seed;
  result.projected.resize(options.samples);
  const auto count = static_cast<double>(cycle_counts.size());
  parallel_for(options.samples, options.threads, [&](std::size_t i) {
    CounterRng rng(options.seed, i);
    const auto start = std::min(cycle_counts.size() - 1, static_cast<std::size_t>(rng.uniform() * count));
    const double c = cycle_counts[start];
    const double whole = std::floor(c);
    const int cycles = static_cast<int>(whole) + (rng.uniform() < c - whole ? 1 : 0);
    result.projected[i] = walk_one(rng, cycles, geometry, options.absorption);
  });
  summarize(result);
  return result;
}

CycleCounts expected_cycles(std::span<const BeamSpec> beams, double alpha, const CycleOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw std::invalid_argument("pumped threshold must lie in (0, 1)");
  }
  if (!(options.step_gamma > 0.0)) throw std::invalid_argument("step must be > 0");
  const auto contaminated = with_contamination(beams, alpha);
  RateMatrix matrix = assemble_rate_matrix(contaminated);
  if (options.prune) matrix = prune(matrix, kDefaultPruneThreshold).matrix;
  const double dt = options.step_gamma / constants::gamma;
  const SublevelLabel dark = SublevelLabel::ground(4, 0);

  const auto photons = [&](const Populations& n0, bool& reached) {
    const ThresholdRun run = run_until_fraction(matrix, n0, dt, options.t_end, dark, options.threshold);
    reached = run.crossing.has_value();
    return reached ? run.crossing->photons : run.final_photons;
  };

  CycleCounts counts;
  double sum = 0.0;
  for (int m = -4; m <= 4; ++m) {
    const auto k = static_cast<std::size_t>(m + 4);
    bool reached = false;
    counts.per_sublevel[k] = photons(single_sublevel_populations(SublevelLabel::ground(4, m)), reached);
    counts.reached[k] = reached;
    sum += counts.per_sublevel[k];
  }
  counts.sublevel_average = sum / 9.0;
  counts.uniform = photons(uniform_f4_populations(), counts.uniform_reached);
  return counts;
}

HeatingSummary heating_summary(double initial_vrms, std::span<const BeamSpec> beams, double alpha,
                               const RecoilGeometry& geometry, const CycleOptions& cycle_options,
                               const WalkOptions& walk_options) {
  if (!(initial_vrms >= 0.0)) throw std::invalid_argument("initial rms velocity must be >= 0");
  HeatingSummary summary;
  summary.cycles = expected_cycles(beams, alpha, cycle_options);
  summary.walk = recoil_walk_mixture(summary.cycles.per_sublevel, geometry, walk_options);
  summary.initial_vrms = initial_vrms;
  summary.delta_vrms = summary.walk.delta_vrms_axis;
  summary.final_vrms_quadrature = std::hypot(initial_vrms, summary.delta_vrms);
  summary.final_vrms_additive = initial_vrms + summary.delta_vrms;
  return summary;
}

void write_histogram(std::ostream& os, const HeatingResult& result, double bin_width) {
  if (!(bin_width > 0.0)) throw std::invalid_argument("bin width must be > 0");
  std::map<long long, std::size_t> bins;
  for (double v : result.projected) ++bins[static_cast<long long>(std::floor(v / bin_width))];
  os << "v_over_vr, count\n";
  for (const auto& [bin, count] : bins) {
    os << (static_cast<double>(bin) + 0.5) * bin_width << ", " << count << '\n';
  }
}

}  // namespace pumpsim
