#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lcgp/error.hpp"
#include "lcgp/gp_core.hpp"
#include "lcgp/kernels.hpp"
#include "lcgp/markov.hpp"

namespace lcgp {

/// Hidden state is a frequency in Hz; each local process is Oscillatory{d_s, state}.
struct FrequencyFamily {
  double d_s;
};

/// Hidden state is alpha in {0, 1}; each local process is TwoStateMix{alpha, ...}.
struct SwitchFamily {
  StationaryKernel broadband;
  StationaryKernel oscillatory;
};

using LocalModelFamily = std::variant<FrequencyFamily, SwitchFamily>;

inline KernelSpec kernel_for(const LocalModelFamily& family, double state) {
  KernelSpec spec = std::visit(
      [state](const auto& f) -> KernelSpec {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, FrequencyFamily>) {
          return Oscillatory{f.d_s, state};
        } else {
          if (state != 0.0 && state != 1.0) {
            throw ConfigError("switch family needs a binary state, got " + detail::format_number(state));
          }
          return TwoStateMix{static_cast<int>(state), f.broadband, f.oscillatory};
        }
      },
      family);
  validate(spec);
  return spec;
}

/// Sample indices with nonzero truncated weight, one list per support point.
struct SegmentationPlan {
  std::vector<std::vector<Eigen::Index>> segments;

  std::size_t size() const { return segments.size(); }
};

inline SegmentationPlan plan_segments(const WindowSet& windows) {
  SegmentationPlan plan;
  const auto m = windows.weights.rows();
  plan.segments.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    auto& seg = plan.segments[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < windows.weights.cols(); ++j) {
      if (windows.weights(i, j) > 0.0) seg.push_back(j);
    }
    if (seg.empty()) {
      throw ConfigError("segment around support point " +
                        detail::format_number(windows.support_points[static_cast<std::size_t>(i)]) +
                        " contains no samples (window too narrow for the sample spacing)");
    }
  }
  return plan;
}

namespace detail {

// Runs body(i) for i in [0, count) on up to hardware_concurrency threads.
// Each index is handled by exactly one thread; the first exception is rethrown.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Windowed local Gram (w w^T) .* K(state) restricted to one segment.
inline Eigen::MatrixXd segment_gram(std::span<const double> times, const WindowSet& windows,
                                    Eigen::Index support, const std::vector<Eigen::Index>& segment,
                                    const KernelSpec& kernel) {
  const auto len = static_cast<Eigen::Index>(segment.size());
  Eigen::MatrixXd gram(len, len);
  for (Eigen::Index a = 0; a < len; ++a) {
    const double wa = windows.weights(support, segment[a]);
    gram(a, a) = wa * wa * kernel_at_lag(kernel, 0.0);
    for (Eigen::Index b = a + 1; b < len; ++b) {
      const double v = wa * windows.weights(support, segment[b]) *
                       kernel_at_lag(kernel, times[segment[a]] - times[segment[b]]);
      gram(a, b) = v;
      gram(b, a) = v;
    }
  }
  return gram;
}

/// log p(segment_i | state_a) for every (segment, state) pair. Cells are
/// independent and computed in parallel.
inline EmissionMatrix segment_emissions(const TimeSeries& series, const WindowSet& windows,
                                        const SegmentationPlan& plan, const LocalModelFamily& family,
                                        const StateGrid& grid, NoiseModel noise) {
  noise.validate();
  if (windows.num_samples() != series.size()) {
    throw InputError("window table covers " + std::to_string(windows.num_samples()) +
                     " samples, series has " + std::to_string(series.size()));
  }
  if (plan.size() != windows.num_support()) {
    throw InputError("segmentation plan does not match the window set");
  }

  std::vector<KernelSpec> kernels;
  kernels.reserve(grid.size());
  for (double state : grid.values()) kernels.push_back(kernel_for(family, state));

  const auto values = series.values();
  EmissionMatrix out(static_cast<Eigen::Index>(plan.size()), static_cast<Eigen::Index>(grid.size()));
  detail::parallel_for(plan.size(), [&](std::size_t i) {
    const auto& seg = plan.segments[i];
    Eigen::VectorXd s(static_cast<Eigen::Index>(seg.size()));
    for (std::size_t a = 0; a < seg.size(); ++a) s(static_cast<Eigen::Index>(a)) = values[seg[a]];
    for (std::size_t a = 0; a < grid.size(); ++a) {
      try {
        const GpSystem system(
            segment_gram(series.times(), windows, static_cast<Eigen::Index>(i), seg, kernels[a]), noise);
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = system.log_marginal_likelihood(s);
      } catch (const NumericalError& e) {
        throw NumericalError("segment " + std::to_string(i) + ", state " + detail::format_number(grid[a]) +
                                 ": " + e.what(),
                             e.attempted_jitter());
      }
    }
  });
  return out;
}

struct GlobalCovariance {
  Eigen::MatrixXd matrix;
  std::vector<double> point_estimates;
};

/// Sum over support points of w(t_j) w(t_k) k_i(t_j - t_k; estimate_i).
inline GlobalCovariance assemble_global_covariance(const WindowSet& windows, const LocalModelFamily& family,
                                                   std::vector<double> point_estimates,
                                                   std::span<const double> times) {
  if (point_estimates.size() != windows.num_support()) {
    throw InputError("need one point estimate per support point (" + std::to_string(windows.num_support()) +
                     "), got " + std::to_string(point_estimates.size()));
  }
  if (times.size() != windows.num_samples()) throw InputError("times do not match the window set");

  const auto n = static_cast<Eigen::Index>(times.size());
  GlobalCovariance out;
  out.matrix = Eigen::MatrixXd::Zero(n, n);
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < windows.weights.rows(); ++i) {
    const KernelSpec kernel = kernel_for(family, point_estimates[static_cast<std::size_t>(i)]);
    support.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (windows.weights(i, j) > 0.0) support.push_back(j);
    }
    for (std::size_t a = 0; a < support.size(); ++a) {
      const Eigen::Index j = support[a];
      const double wj = windows.weights(i, j);
      out.matrix(j, j) += wj * wj * kernel_at_lag(kernel, 0.0);
      for (std::size_t b = a + 1; b < support.size(); ++b) {
        const Eigen::Index k = support[b];
        out.matrix(j, k) += wj * windows.weights(i, k) * kernel_at_lag(kernel, times[j] - times[k]);
      }
    }
  }
  out.matrix.triangularView<Eigen::StrictlyLower>() = out.matrix.transpose();
  out.point_estimates = std::move(point_estimates);
  return out;
}

enum class Estimator { Mean, Mode };

struct RandomWalkTransition {
  double step_std;
  double autoregressive_coeff = 1.0;
};

struct SwitchTransition {
  double stay_probability = 0.98;
};

using TransitionParams = std::variant<RandomWalkTransition, SwitchTransition>;

struct WindowParams {
  double spacing_s;
  double width_s;
  double truncation_radius = 3.0;
};

struct CoupledModelConfig {
  LocalModelFamily family;
  StateGrid grid;
  TransitionParams transition;
  WindowParams windows;
  NoiseModel noise;
  Estimator estimator = Estimator::Mean;
  /// Noise variance for the final whole-series regression; defaults to `noise`.
  std::optional<NoiseModel> regression_noise;

  void validate() const {
    noise.validate();
    if (regression_noise) regression_noise->validate();
    const bool is_switch = std::holds_alternative<SwitchFamily>(family);
    if (is_switch) {
      if (grid.size() != 2 || grid[0] != 0.0 || grid[1] != 1.0) {
        throw ConfigError("switch family requires the state grid {0, 1}");
      }
      if (estimator == Estimator::Mean) {
        throw ConfigError("switch family needs the mode estimator (alpha must stay binary)");
      }
    }
    if (std::holds_alternative<SwitchTransition>(transition) && grid.size() != 2) {
      throw ConfigError("two-state transition requires a two-state grid");
    }
    for (double state : grid.values()) (void)kernel_for(family, state);
  }
};

inline TransitionModel build_transition_model(const CoupledModelConfig& config) {
  return std::visit(
      [&](const auto& t) -> TransitionModel {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, RandomWalkTransition>) {
          return build_random_walk_transitions(config.grid, t.step_std, t.autoregressive_coeff);
        } else {
          TransitionModel model = build_two_state_transitions(t.stay_probability);
          model.grid = config.grid;
          return model;
        }
      },
      config.transition);
}

struct FitResult {
  WindowSet windows;
  SegmentationPlan plan;
  EmissionMatrix emissions;
  PosteriorMarginals marginals;
  std::vector<double> point_estimates;
  GlobalCovariance global_cov;
  RegressionResult regression;
  double regression_jitter = 0.0;
};

namespace detail {

// Re-raises library errors with the pipeline stage prepended, keeping the type.
template <class Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  const auto tag = [stage](const std::exception& e) { return std::string(stage) + ": " + e.what(); };
  try {
    return fn();
  } catch (const NumericalError& e) {
    throw NumericalError(tag(e), e.attempted_jitter());
  } catch (const ConfigError& e) {
    throw ConfigError(tag(e));
  } catch (const InputError& e) {
    throw InputError(tag(e));
  }
}

}  // namespace detail

/// windows -> segments -> emissions -> forward-backward -> point estimates ->
/// global covariance -> whole-series regression.
inline FitResult fit(const TimeSeries& series, const CoupledModelConfig& config) {
  detail::run_stage("config", [&] {
    config.validate();
    return 0;
  });

  FitResult r;
  r.windows = detail::run_stage("windows", [&] {
    return build_windows(series.times(), config.windows.spacing_s, config.windows.width_s,
                         config.windows.truncation_radius);
  });
  r.plan = detail::run_stage("segments", [&] { return plan_segments(r.windows); });
  r.emissions = detail::run_stage("emissions", [&] {
    return segment_emissions(series, r.windows, r.plan, config.family, config.grid, config.noise);
  });
  r.marginals = detail::run_stage("forward-backward", [&] {
    return forward_backward(build_transition_model(config), r.emissions);
  });
  r.point_estimates = config.estimator == Estimator::Mean ? point_estimate_mean(r.marginals, config.grid)
                                                          : point_estimate_mode(r.marginals, config.grid);
  r.global_cov = detail::run_stage("global covariance", [&] {
    return assemble_global_covariance(r.windows, config.family, r.point_estimates, series.times());
  });
  detail::run_stage("regression", [&] {
    const GpSystem system(r.global_cov.matrix, config.regression_noise.value_or(config.noise));
    r.regression = system.regress(series.values_vector());
    r.regression_jitter = system.jitter();
    return 0;
  });
  return r;
}

}  // namespace lcgp
