#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lcgp/detail/numfmt.hpp"
#include "lcgp/error.hpp"

namespace lcgp {

// Stationary covariance families. All have unit value at zero lag; the
// signal amplitude is expressed through the noise variance instead.

/// exp(-tau^2 / (2 delta^2))
struct SquaredExponential {
  double delta_s;
};

/// exp(-tau^2 / (2 d^2)) * cos(2 pi freq_hz tau). Frequency is stored in Hz.
struct Oscillatory {
  double d_s;
  double freq_hz;
};

/// exp(-|tau| / ell). Continuous, not differentiable.
struct Exponential {
  double ell_s;
};

using StationaryKernel = std::variant<SquaredExponential, Oscillatory, Exponential>;

/// alpha * broadband + (1 - alpha) * oscillatory with binary alpha.
struct TwoStateMix {
  int alpha;
  StationaryKernel broadband;
  StationaryKernel oscillatory;
};

using KernelSpec = std::variant<SquaredExponential, Oscillatory, Exponential, TwoStateMix>;

inline KernelSpec as_kernel(const StationaryKernel& k) {
  return std::visit([](const auto& v) -> KernelSpec { return v; }, k);
}

namespace detail {

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be finite and > 0, got " + format_number(v));
  }
}

inline void validate_one(const SquaredExponential& k) { require_positive(k.delta_s, "delta_s"); }
inline void validate_one(const Exponential& k) { require_positive(k.ell_s, "ell_s"); }
inline void validate_one(const Oscillatory& k) {
  require_positive(k.d_s, "d_s");
  if (!(k.freq_hz >= 0.0) || !std::isfinite(k.freq_hz)) {
    throw ConfigError("freq_hz must be finite and >= 0, got " + format_number(k.freq_hz));
  }
}

inline double lag_value(const SquaredExponential& k, double tau) {
  return std::exp(-tau * tau / (2.0 * k.delta_s * k.delta_s));
}
inline double lag_value(const Oscillatory& k, double tau) {
  return std::exp(-tau * tau / (2.0 * k.d_s * k.d_s)) *
         std::cos(2.0 * std::numbers::pi * k.freq_hz * tau);
}
inline double lag_value(const Exponential& k, double tau) { return std::exp(-std::abs(tau) / k.ell_s); }

inline double lag_value(const StationaryKernel& k, double tau) {
  return std::visit([tau](const auto& v) { return lag_value(v, tau); }, k);
}

inline double lag_value(const TwoStateMix& k, double tau) {
  return k.alpha == 1 ? lag_value(k.broadband, tau) : lag_value(k.oscillatory, tau);
}

}  // namespace detail

inline void validate(const StationaryKernel& spec) {
  std::visit([](const auto& k) { detail::validate_one(k); }, spec);
}

inline void validate(const KernelSpec& spec) {
  std::visit(
      [](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, TwoStateMix>) {
          if (k.alpha != 0 && k.alpha != 1) {
            throw ConfigError("two-state alpha must be 0 or 1, got " + std::to_string(k.alpha));
          }
          validate(k.broadband);
          validate(k.oscillatory);
        } else {
          detail::validate_one(k);
        }
      },
      spec);
}

/// Covariance as a function of the lag t - t'. Assumes a validated spec.
inline double kernel_at_lag(const KernelSpec& spec, double tau) {
  return std::visit([tau](const auto& k) { return detail::lag_value(k, tau); }, spec);
}

inline double eval_kernel(const KernelSpec& spec, double t, double t_prime) {
  validate(spec);
  return kernel_at_lag(spec, t - t_prime);
}

/// Gram matrix of `spec` over `times`.
inline Eigen::MatrixXd build_gram(const KernelSpec& spec, std::span<const double> times) {
  validate(spec);
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd gram(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    gram(j, j) = kernel_at_lag(spec, 0.0);
    for (Eigen::Index k = j + 1; k < n; ++k) {
      const double v = kernel_at_lag(spec, times[j] - times[k]);
      gram(j, k) = v;
      gram(k, j) = v;
    }
  }
  return gram;
}

// ---------------------------------------------------------------------------
// Textual form used in configuration files:
//   se(delta_s=0.2)   osc(d_s=0.4, freq_hz=5)   exp(ell_s=0.3)

inline std::string to_string(const StationaryKernel& spec) {
  using detail::format_number;
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SquaredExponential>) {
          return "se(delta_s=" + format_number(k.delta_s) + ")";
        } else if constexpr (std::is_same_v<T, Oscillatory>) {
          return "osc(d_s=" + format_number(k.d_s) + ", freq_hz=" + format_number(k.freq_hz) + ")";
        } else {
          return "exp(ell_s=" + format_number(k.ell_s) + ")";
        }
      },
      spec);
}

inline std::string to_string(const KernelSpec& spec) {
  return std::visit(
      [](const auto& k) -> std::string {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, TwoStateMix>) {
          return "mix(alpha=" + std::to_string(k.alpha) + ", " + to_string(k.broadband) + ", " +
                 to_string(k.oscillatory) + ")";
        } else {
          return to_string(StationaryKernel{k});
        }
      },
      spec);
}

/// Parses the textual form of a stationary kernel. Throws ParseError.
inline StationaryKernel parse_kernel(std::string_view text) {
  using detail::trim;
  const std::string original(text);
  text = trim(text);
  const auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')') {
    throw ParseError("kernel '" + original + "': expected name(key=value, ...)");
  }
  const auto name = trim(text.substr(0, open));
  auto args = text.substr(open + 1, text.size() - open - 2);

  std::vector<std::pair<std::string, double>> params;
  while (!trim(args).empty()) {
    const auto comma = args.find(',');
    const auto item = args.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("kernel '" + original + "': argument without '='");
    }
    const auto value = detail::parse_number(item.substr(eq + 1));
    if (!value) throw ParseError("kernel '" + original + "': bad number in '" + std::string(item) + "'");
    params.emplace_back(std::string(trim(item.substr(0, eq))), *value);
    if (comma == std::string_view::npos) break;
    args.remove_prefix(comma + 1);
  }

  auto take = [&](const char* key) {
    for (auto it = params.begin(); it != params.end(); ++it) {
      if (it->first == key) {
        const double v = it->second;
        params.erase(it);
        return v;
      }
    }
    throw ParseError("kernel '" + original + "': missing '" + key + "'");
  };

  StationaryKernel out;
  if (name == "se") {
    out = SquaredExponential{take("delta_s")};
  } else if (name == "osc") {
    const double d = take("d_s");
    out = Oscillatory{d, take("freq_hz")};
  } else if (name == "exp") {
    out = Exponential{take("ell_s")};
  } else {
    throw ParseError("unknown kernel family '" + std::string(name) + "'");
  }
  if (!params.empty()) {
    throw ParseError("kernel '" + original + "': unexpected argument '" + params.front().first + "'");
  }
  validate(out);
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian window basis

/// Normalized Gaussian windows on a regular support grid.
///
/// `weights(i, j)` is the weight of support point i at sample j. Columns are
/// normalized so that the squared weights sum to one, which keeps the prior
/// variance of the mixture process equal to that of the local kernels.
struct WindowSet {
  std::vector<double> support_points;
  double spacing_s = 0.0;
  double width_s = 0.0;
  double truncation_radius = 3.0;
  Eigen::MatrixXd weights;  // m x n

  std::size_t num_support() const { return support_points.size(); }
  std::size_t num_samples() const { return static_cast<std::size_t>(weights.cols()); }
};

/// Builds the window basis. The first support point sits at min(times); the
/// grid continues at `spacing` until the last point is >= max(times) - spacing.
/// Weights farther than truncation_radius * width from their centre are zero.
inline WindowSet build_windows(std::span<const double> times, double spacing, double width,
                               double truncation_radius = 3.0) {
  detail::require_positive(spacing, "window spacing");
  detail::require_positive(width, "window width");
  detail::require_positive(truncation_radius, "truncation radius");
  if (times.empty()) throw InputError("build_windows: no sample times");
  for (double t : times) {
    if (!std::isfinite(t)) throw InputError("build_windows: non-finite sample time");
  }

  const auto [lo_it, hi_it] = std::minmax_element(times.begin(), times.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const auto m = static_cast<std::size_t>(std::floor((hi - lo) / spacing + 1e-9)) + 1;

  WindowSet ws;
  ws.spacing_s = spacing;
  ws.width_s = width;
  ws.truncation_radius = truncation_radius;
  ws.support_points.reserve(m);
  for (std::size_t i = 0; i < m; ++i) ws.support_points.push_back(lo + static_cast<double>(i) * spacing);

  const auto n = static_cast<Eigen::Index>(times.size());
  const double cutoff = truncation_radius * width * (1.0 + 1e-9);
  ws.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double dt = times[j] - ws.support_points[i];
      if (std::abs(dt) > cutoff) continue;
      const double w = std::exp(-dt * dt / (2.0 * width * width));
      ws.weights(static_cast<Eigen::Index>(i), j) = w;
      sq += w * w;
    }
    if (!(sq > 0.0)) {
      throw ConfigError("window grid leaves sample time " + detail::format_number(times[j]) +
                        " uncovered (width too narrow for spacing)");
    }
    ws.weights.col(j) /= std::sqrt(sq);
  }
  return ws;
}

}  // namespace lcgp
