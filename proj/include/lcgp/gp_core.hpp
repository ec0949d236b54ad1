#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "lcgp/detail/numfmt.hpp"
#include "lcgp/error.hpp"

namespace lcgp {

/// Sample times (seconds) with their measured values.
class TimeSeries {
 public:
  TimeSeries(std::vector<double> times, std::vector<double> values)
      : times_(std::move(times)), values_(std::move(values)) {
    if (times_.empty()) throw InputError("time series is empty");
    if (times_.size() != values_.size()) {
      throw InputError("time series has " + std::to_string(times_.size()) + " times but " +
                       std::to_string(values_.size()) + " values");
    }
    for (std::size_t j = 0; j < times_.size(); ++j) {
      if (!std::isfinite(times_[j]) || !std::isfinite(values_[j])) {
        throw InputError("non-finite entry at sample " + std::to_string(j));
      }
      if (j > 0 && !(times_[j] > times_[j - 1])) {
        throw InputError("times not strictly increasing at sample " + std::to_string(j) + " (t=" +
                         detail::format_number(times_[j]) + ")");
      }
    }
  }

  std::size_t size() const { return times_.size(); }
  std::span<const double> times() const { return times_; }
  std::span<const double> values() const { return values_; }

  Eigen::Map<const Eigen::VectorXd> values_vector() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

 private:
  std::vector<double> times_;
  std::vector<double> values_;
};

/// White observation noise with variance `variance` (value units squared).
struct NoiseModel {
  double variance;

  static NoiseModel from_std(double std_dev) { return NoiseModel{std_dev * std_dev}; }

  void validate() const {
    if (!(variance > 0.0) || !std::isfinite(variance)) {
      throw ConfigError("noise variance must be finite and > 0, got " + detail::format_number(variance));
    }
  }
};

struct RegressionResult {
  Eigen::VectorXd posterior_mean;
  Eigen::VectorXd posterior_variance;
};

/// Lower Cholesky factor of (matrix + jitter * I).
struct Factorization {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

/// Cholesky with escalating diagonal jitter.
///
/// The first attempt uses no jitter. Subsequent attempts add
/// 1e-10 * trace/n, growing tenfold up to 1e-4 * trace/n. Throws
/// NumericalError listing every level tried when all attempts fail.
inline Factorization robust_factorize(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw InputError("robust_factorize: matrix must be square and non-empty");
  }
  if (!matrix.allFinite()) throw InputError("robust_factorize: non-finite matrix entry");

  const auto n = matrix.rows();
  const double scale = matrix.trace() / static_cast<double>(n);

  std::vector<double> tried;
  Factorization f;
  f.llt.compute(matrix);
  tried.push_back(0.0);
  if (f.llt.info() == Eigen::Success) return f;

  if (scale > 0.0) {
    Eigen::MatrixXd shifted = matrix;
    double applied = 0.0;
    for (double level = 1e-10; level <= 1e-4 * (1.0 + 1e-9); level *= 10.0) {
      const double jitter = level * scale;
      shifted.diagonal().array() += jitter - applied;
      applied = jitter;
      tried.push_back(jitter);
      f.llt.compute(shifted);
      if (f.llt.info() == Eigen::Success) {
        f.jitter = jitter;
        return f;
      }
    }
  }

  std::string levels;
  for (double j : tried) levels += (levels.empty() ? "" : ", ") + detail::format_number(j);
  throw NumericalError("factorization failed; jitter tried: [" + levels + "]", std::move(tried));
}

/// A factorized regression problem K + lambda I. One factorization serves the
/// likelihood, the posterior mean and the posterior variance.
class GpSystem {
 public:
  GpSystem(Eigen::MatrixXd gram, NoiseModel noise) : gram_(std::move(gram)), noise_(noise) {
    noise_.validate();
    if (gram_.rows() != gram_.cols()) throw InputError("gram matrix is not square");
    Eigen::MatrixXd total = gram_;
    total.diagonal().array() += noise_.variance;
    factor_ = robust_factorize(total);
  }

  Eigen::Index size() const { return gram_.rows(); }
  double jitter() const { return factor_.jitter; }
  const Eigen::MatrixXd& gram() const { return gram_; }

  /// log N(values | 0, K + lambda I)
  double log_marginal_likelihood(const Eigen::Ref<const Eigen::VectorXd>& values) const {
    check_size(values);
    const auto n = static_cast<double>(size());
    const Eigen::VectorXd z = factor_.llt.matrixL().solve(values);
    const double log_det_half = factor_.llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * n * std::log(2.0 * std::numbers::pi) - log_det_half - 0.5 * z.squaredNorm();
  }

  /// K (K + lambda I)^-1 values
  Eigen::VectorXd posterior_mean(const Eigen::Ref<const Eigen::VectorXd>& values) const {
    check_size(values);
    return gram_ * factor_.llt.solve(values);
  }

  /// diag(K - K (K + lambda I)^-1 K), clamped to [0, diag(K)].
  Eigen::VectorXd posterior_variance() const {
    const Eigen::MatrixXd v = factor_.llt.matrixL().solve(gram_);
    Eigen::VectorXd out = gram_.diagonal() - v.colwise().squaredNorm().transpose();
    for (Eigen::Index j = 0; j < out.size(); ++j) out(j) = std::clamp(out(j), 0.0, gram_(j, j));
    return out;
  }

  RegressionResult regress(const Eigen::Ref<const Eigen::VectorXd>& values) const {
    return {posterior_mean(values), posterior_variance()};
  }

 private:
  void check_size(const Eigen::Ref<const Eigen::VectorXd>& values) const {
    if (values.size() != size()) {
      throw InputError("value vector has length " + std::to_string(values.size()) + ", expected " +
                       std::to_string(size()));
    }
  }

  Eigen::MatrixXd gram_;
  NoiseModel noise_;
  Factorization factor_;
};

inline double log_marginal_likelihood(const Eigen::MatrixXd& gram, NoiseModel noise,
                                      const Eigen::Ref<const Eigen::VectorXd>& values) {
  return GpSystem(gram, noise).log_marginal_likelihood(values);
}

inline Eigen::VectorXd posterior_mean(const Eigen::MatrixXd& gram, NoiseModel noise,
                                      const Eigen::Ref<const Eigen::VectorXd>& values) {
  return GpSystem(gram, noise).posterior_mean(values);
}

inline Eigen::VectorXd posterior_variance(const Eigen::MatrixXd& gram, NoiseModel noise) {
  return GpSystem(gram, noise).posterior_variance();
}

}  // namespace lcgp
