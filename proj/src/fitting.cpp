#include "pumpsim/fitting.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string_view>

#include "pumpsim/error.hpp"

namespace pumpsim {

namespace {

// Observed fractions carry additive detection noise, so values slightly
// outside [0, 1] are legitimate data.
constexpr double kNoiseBand = 0.2;

bool fraction_in_range(double f) { return f >= -kNoiseBand && f <= 1.0 + kNoiseBand; }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line) + ": " + what);
}

void check_series_list(std::span<const ObservationSeries> series) {
  if (series.empty()) throw DataError("no observation series given");
  for (const auto& s : series) s.validate();
}

double closed_form_amplitude(const ObservationSeries& s, const std::vector<double>& simulated) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < simulated.size(); ++i) {
    num += s.weight(i) * simulated[i] * s.fractions[i];
    den += s.weight(i) * simulated[i] * simulated[i];
  }
  return den > 0.0 ? num / den : 1.0;
}

}  // namespace

void ObservationSeries::validate() const {
  if (!sublevel.is_ground()) throw DataError("observed sublevel must be a ground sublevel");
  if (times.empty()) throw DataError("observation series is empty");
  if (fractions.size() != times.size()) throw DataError("times and fractions differ in length");
  if (!weights.empty() && weights.size() != times.size()) {
    throw DataError("weights and times differ in length");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] >= 0.0) || !std::isfinite(times[i])) throw DataError("observation time must be >= 0");
    if (i > 0 && !(times[i] > times[i - 1])) throw DataError("observation times must be strictly increasing");
    if (!fraction_in_range(fractions[i])) throw DataError("observed fraction outside [-0.2, 1.2]");
    if (!(weight(i) >= 0.0) || !std::isfinite(weight(i))) throw DataError("weights must be >= 0");
  }
}

ObservationSeries read_observations(std::istream& is, const std::string& source) {
  ObservationSeries series;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_row = false;
  bool any_weight = false;
  bool missing_weight = false;
  while (std::getline(is, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string_view::npos && trim(body.substr(0, eq)) == "sublevel") {
        try {
          series.sublevel = parse_sublevel(trim(body.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
          fail(source, line_no, e.what());
        }
        if (!series.sublevel.is_ground()) fail(source, line_no, "observed sublevel must be a ground sublevel");
      }
      continue;
    }
    const auto fields = split_fields(line);
    double t = 0.0;
    if (!parse_double(fields[0], t)) {
      if (!seen_row) {
        seen_row = true;  // header
        continue;
      }
      fail(source, line_no, "cannot parse time '" + std::string(fields[0]) + "'");
    }
    seen_row = true;
    if (fields.size() < 2 || fields.size() > 3) fail(source, line_no, "expected 2 or 3 comma-separated fields");
    double f = 0.0;
    if (!parse_double(fields[1], f)) fail(source, line_no, "cannot parse fraction '" + std::string(fields[1]) + "'");
    if (t < 0.0) fail(source, line_no, "time must be >= 0");
    if (!fraction_in_range(f)) fail(source, line_no, "fraction outside [-0.2, 1.2]");
    if (!series.times.empty() && !(t > series.times.back())) {
      fail(source, line_no, "times must be strictly increasing");
    }
    double w = 1.0;
    if (fields.size() == 3) {
      if (!parse_double(fields[2], w) || w < 0.0) fail(source, line_no, "weight must be a number >= 0");
      any_weight = true;
    } else {
      missing_weight = true;
    }
    if (any_weight && missing_weight) fail(source, line_no, "weights must be given on every row or none");
    series.times.push_back(t);
    series.fractions.push_back(f);
    series.weights.push_back(w);
  }
  if (series.times.empty()) throw DataError(source + ": no observations");
  if (!any_weight) series.weights.clear();
  return series;
}

ObservationSeries read_observation_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  return read_observations(in, path.string());
}

void write_observations(std::ostream& os, const ObservationSeries& series) {
  os << "# sublevel=" << series.sublevel.name() << '\n';
  os << (series.weights.empty() ? "time_s, fraction\n" : "time_s, fraction, weight\n");
  os << std::setprecision(17);
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    os << series.times[i] << ", " << series.fractions[i];
    if (!series.weights.empty()) os << ", " << series.weights[i];
    os << '\n';
  }
}

std::vector<std::vector<double>> simulate_series(std::span<const ObservationSeries> series,
                                                 std::span<const BeamSpec> beams, double alpha,
                                                 const FitOptions& options) {
  const auto contaminated = with_contamination(beams, alpha);
  RateMatrix matrix = assemble_rate_matrix(contaminated);
  if (options.prune) matrix = prune(matrix, kDefaultPruneThreshold).matrix;
  const double dt = options.step_gamma / constants::gamma;
  std::vector<std::vector<double>> out;
  out.reserve(series.size());
  for (const auto& s : series) {
    const auto pops = populations_at(matrix, options.initial, dt, s.times);
    std::vector<double> f(pops.size());
    std::transform(pops.begin(), pops.end(), f.begin(),
                   [&](const Populations& n) { return ground_fraction(n, s.sublevel); });
    out.push_back(std::move(f));
  }
  return out;
}

ResidualReport residual_report(std::span<const ObservationSeries> series, std::span<const BeamSpec> beams,
                               double alpha, const FitOptions& options) {
  check_series_list(series);
  const auto simulated = simulate_series(series, beams, alpha, options);
  ResidualReport report;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const double amplitude = s.fit_amplitude ? closed_form_amplitude(s, simulated[k]) : 1.0;
    std::vector<double> r(s.times.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = amplitude * simulated[k][i] - s.fractions[i];
      report.sse += s.weight(i) * r[i] * r[i];
    }
    report.residuals.push_back(std::move(r));
    report.amplitudes.push_back(amplitude);
  }
  return report;
}

FitResult fit_alpha(std::span<const ObservationSeries> series, std::span<const BeamSpec> beams,
                    const FitOptions& options) {
  check_series_list(series);
  if (!(options.alpha_max > 0.0) || !std::isfinite(options.alpha_max)) {
    throw std::invalid_argument("alpha_max must be > 0");
  }
  if (options.max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");

  FitResult result;
  const auto objective = [&](double alpha) {
    ++result.iterations;
    return residual_report(series, beams, alpha, options).sse;
  };

  // Coarse scan brackets the global minimum; the first of equal values wins.
  constexpr int kScan = 20;
  const double h = options.alpha_max / kScan;
  std::array<double, kScan + 1> scan{};
  int best = 0;
  for (int i = 0; i <= kScan; ++i) {
    scan[static_cast<std::size_t>(i)] = objective(i * h);
    if (scan[static_cast<std::size_t>(i)] < scan[static_cast<std::size_t>(best)]) best = i;
  }
  const double f_zero = scan[0];
  const double f_probe = objective(std::min(0.05, options.alpha_max));
  result.weakly_identified = std::abs(f_probe - f_zero) <= 10.0 * options.tolerance();

  // Brent's golden-section search with parabolic steps on the bracket.
  constexpr double kGoldenSection = 0.3819660112501051;
  double a = std::max(0, best - 1) * h;
  double b = std::min(kScan, best + 1) * h;
  double x = best * h;
  double w = x;
  double v = x;
  double fx = scan[static_cast<std::size_t>(best)];
  double fw = fx;
  double fv = fx;
  double d = 0.0;
  double e = 0.0;
  const double tol1 = options.tolerance() / 3.0;
  const double tol2 = 2.0 * tol1;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const double xm = 0.5 * (a + b);
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) {
      result.converged = true;
      break;
    }
    bool golden = true;
    if (std::abs(e) > tol1) {
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = std::copysign(tol1, xm - x);
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = kGoldenSection * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + std::copysign(tol1, d);
    const double fu = objective(u);
    if (fu < fx || (fu == fx && u < x)) {
      if (u >= x) {
        a = x;
      } else {
        b = x;
      }
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x) {
        a = u;
      } else {
        b = u;
      }
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }

  result.alpha_hat = x;
  const auto report = residual_report(series, beams, x, options);
  result.sse = report.sse;
  result.amplitudes = report.amplitudes;
  return result;
}

}  // namespace pumpsim
