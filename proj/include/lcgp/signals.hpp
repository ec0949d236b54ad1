#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lcgp/coupled.hpp"
#include "lcgp/error.hpp"
#include "lcgp/gp_core.hpp"
#include "lcgp/kernels.hpp"

namespace lcgp {

/// Seeded standard-normal stream: mt19937_64 feeding Box-Muller with 53-bit
/// uniforms. Fully specified, so output is identical across standard libraries.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    const double u1 = uniform_open_closed();
    const double u2 = uniform_open_closed();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    return r * std::cos(phi);
  }

 private:
  // (0, 1]
  double uniform_open_closed() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

struct ChirpSpec {
  double t_start = 0.0;
  double t_end = 2.5;
  double sample_rate_hz = 100.0;
  double noise_std = 0.5;
  std::uint64_t seed = 1;
};

struct TwoStateSpec {
  double t_start = -2.5;
  double t_end = 2.5;
  double step = 0.01;
  double noise_std = 0.3;
  std::uint64_t seed = 1;
  /// Oscillatory label where the burst envelope exceeds this value.
  double state_threshold = 0.5;
};

struct ChirpData {
  TimeSeries clean;
  TimeSeries noisy;
  std::vector<double> true_frequency;  // Hz
};

struct TwoStateData {
  TimeSeries clean;
  TimeSeries noisy;
  std::vector<double> true_state;  // 1 = oscillatory burst, 0 = broadband
};

namespace detail {

inline std::vector<double> regular_times(double t_start, double t_end, double step) {
  if (!(t_end > t_start) || !(step > 0.0) || !std::isfinite(t_end - t_start)) {
    throw ConfigError("signal time range must satisfy t_end > t_start with a positive step");
  }
  const auto n = static_cast<std::size_t>(std::floor((t_end - t_start) / step + 1e-9)) + 1;
  std::vector<double> t(n);
  for (std::size_t j = 0; j < n; ++j) t[j] = t_start + static_cast<double>(j) * step;
  return t;
}

inline std::vector<double> add_noise(std::span<const double> clean, double noise_std, std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  GaussianNoise noise(seed);
  std::vector<double> out(clean.begin(), clean.end());
  for (double& v : out) v += noise_std * noise();
  return out;
}

}  // namespace detail

/// sin(2 pi t + 4 pi t^2), instantaneous frequency 1 + 4t Hz.
inline double chirp_value(double t) { return std::sin(2.0 * std::numbers::pi * t + 4.0 * std::numbers::pi * t * t); }
inline double chirp_frequency(double t) { return 1.0 + 4.0 * t; }

/// Slow bumps at t = -2 and t = +2 with a 5 Hz burst around t = 0.
inline double two_state_value(double t) {
  const auto bump = [](double x, double s) { return std::exp(-x * x / (2.0 * s * s)); };
  return bump(t + 2.0, 0.7) + bump(t, 0.3) * std::cos(2.0 * std::numbers::pi * 5.0 * t) + bump(t - 2.0, 0.7);
}

inline double two_state_envelope(double t) { return std::exp(-t * t / (2.0 * 0.3 * 0.3)); }

inline ChirpData gen_chirp(const ChirpSpec& spec) {
  if (!(spec.sample_rate_hz > 0.0)) throw ConfigError("sample_rate_hz must be > 0");
  auto times = detail::regular_times(spec.t_start, spec.t_end, 1.0 / spec.sample_rate_hz);
  // Exact sample instants t_start + j / rate rather than accumulated steps.
  for (std::size_t j = 0; j < times.size(); ++j) {
    times[j] = spec.t_start + static_cast<double>(j) / spec.sample_rate_hz;
  }
  std::vector<double> clean, freq;
  clean.reserve(times.size());
  freq.reserve(times.size());
  for (double t : times) {
    clean.push_back(chirp_value(t));
    freq.push_back(chirp_frequency(t));
  }
  auto noisy = detail::add_noise(clean, spec.noise_std, spec.seed);
  return {TimeSeries(times, std::move(clean)), TimeSeries(times, std::move(noisy)), std::move(freq)};
}

inline TwoStateData gen_two_state(const TwoStateSpec& spec) {
  auto times = detail::regular_times(spec.t_start, spec.t_end, spec.step);
  std::vector<double> clean, state;
  clean.reserve(times.size());
  state.reserve(times.size());
  for (double t : times) {
    clean.push_back(two_state_value(t));
    state.push_back(two_state_envelope(t) > spec.state_threshold ? 1.0 : 0.0);
  }
  auto noisy = detail::add_noise(clean, spec.noise_std, spec.seed);
  return {TimeSeries(times, std::move(clean)), TimeSeries(times, std::move(noisy)), std::move(state)};
}

inline double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw MetricError("correlation: length mismatch");
  if (a.size() < 2) throw MetricError("correlation: need at least two samples");
  const auto n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw MetricError("correlation: zero-variance input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double pearson_correlation(const Eigen::VectorXd& a, std::span<const double> b) {
  return pearson_correlation(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())), b);
}

/// Stationary regression on the whole series.
inline RegressionResult stationary_fit(const TimeSeries& series, const KernelSpec& spec, NoiseModel noise) {
  return GpSystem(build_gram(spec, series.times()), noise).regress(series.values_vector());
}

struct BaselineResult {
  double best_param = 0.0;
  double best_log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<double> log_likelihoods;  // one per candidate
  RegressionResult regression;
};

/// Marginal-likelihood scan over a one-parameter kernel family; the first
/// maximizer wins ties.
inline BaselineResult stationary_baseline_fit(const TimeSeries& series, const LocalModelFamily& family,
                                              std::span<const double> params, NoiseModel noise) {
  if (params.empty()) throw ConfigError("baseline parameter grid is empty");
  BaselineResult out;
  std::optional<GpSystem> best;
  for (double p : params) {
    GpSystem system(build_gram(kernel_for(family, p), series.times()), noise);
    const double ll = system.log_marginal_likelihood(series.values_vector());
    out.log_likelihoods.push_back(ll);
    if (!best || ll > out.best_log_likelihood) {
      out.best_param = p;
      out.best_log_likelihood = ll;
      best.emplace(std::move(system));
    }
  }
  out.regression = best->regress(series.values_vector());
  return out;
}

}  // namespace lcgp
