#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcgp/detail/numfmt.hpp"
#include "lcgp/error.hpp"

namespace lcgp {

/// Ordered values a hidden state can take (frequencies in Hz, or alpha in {0, 1}).
class StateGrid {
 public:
  explicit StateGrid(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ConfigError("state grid is empty");
    for (std::size_t a = 0; a < values_.size(); ++a) {
      if (!std::isfinite(values_[a])) throw ConfigError("state grid has a non-finite value");
      if (a > 0 && !(values_[a] > values_[a - 1])) {
        throw ConfigError("state grid must be strictly increasing");
      }
    }
  }

  /// first, first + step, ... up to last (inclusive, within step * 1e-9).
  static StateGrid range(double first, double last, double step) {
    if (!(step > 0.0) || !(last >= first)) throw ConfigError("invalid state grid range");
    const auto count = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9)) + 1;
    std::vector<double> v;
    v.reserve(count);
    for (std::size_t a = 0; a < count; ++a) v.push_back(first + static_cast<double>(a) * step);
    return StateGrid(std::move(v));
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t a) const { return values_[a]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

struct TransitionModel {
  StateGrid grid;
  Eigen::VectorXd initial;      // m
  Eigen::MatrixXd transitions;  // m x m, row a = p(next | current = a)
};

/// Per-segment log p(segment | state); rows are segments, columns states.
using EmissionMatrix = Eigen::MatrixXd;

struct PosteriorMarginals {
  Eigen::MatrixXd gamma;  // segments x states
  double log_evidence = 0.0;
};

/// Discretized Gaussian random walk / AR(1): row a is proportional to
/// exp(-(grid[b] - coeff * grid[a])^2 / (2 step_std^2)), renormalized over the
/// finite grid. Uniform initial distribution.
inline TransitionModel build_random_walk_transitions(const StateGrid& grid, double step_std,
                                                     double autoregressive_coeff) {
  if (!(step_std > 0.0) || !std::isfinite(step_std)) {
    throw ConfigError("step_std must be finite and > 0");
  }
  if (!std::isfinite(autoregressive_coeff)) throw ConfigError("autoregressive coefficient must be finite");

  const auto m = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd t(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const double centre = autoregressive_coeff * grid[a];
    // Subtract the row's largest exponent so a narrow step never underflows the whole row.
    double max_expo = -std::numeric_limits<double>::infinity();
    for (Eigen::Index b = 0; b < m; ++b) {
      const double z = (grid[b] - centre) / step_std;
      t(a, b) = -0.5 * z * z;
      max_expo = std::max(max_expo, t(a, b));
    }
    t.row(a) = (t.row(a).array() - max_expo).exp();
    t.row(a) /= t.row(a).sum();
  }
  return {grid, Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)), std::move(t)};
}

/// Symmetric two-state switch over alpha in {0, 1}.
inline TransitionModel build_two_state_transitions(double stay_probability) {
  if (!(stay_probability > 0.0 && stay_probability < 1.0)) {
    throw ConfigError("stay probability must lie in (0, 1), got " +
                      detail::format_number(stay_probability));
  }
  Eigen::MatrixXd t(2, 2);
  t << stay_probability, 1.0 - stay_probability, 1.0 - stay_probability, stay_probability;
  return {StateGrid({0.0, 1.0}), Eigen::VectorXd::Constant(2, 0.5), std::move(t)};
}

/// Scaled forward-backward smoothing.
///
/// Each emission row is shifted by its maximum before exponentiation and the
/// forward messages are renormalized per step; the log normalizers sum to the
/// log evidence. Summation order is fixed, so results are reproducible.
inline PosteriorMarginals forward_backward(const TransitionModel& model, const EmissionMatrix& emissions) {
  const auto m = static_cast<Eigen::Index>(model.grid.size());
  const auto segments = emissions.rows();
  if (emissions.cols() != m) {
    throw InputError("emission table has " + std::to_string(emissions.cols()) + " states, model has " +
                     std::to_string(m));
  }
  if (segments < 1) throw InputError("emission table has no segments");
  if (model.transitions.rows() != m || model.transitions.cols() != m || model.initial.size() != m) {
    throw InputError("transition model dimensions do not match its grid");
  }
  if (!emissions.allFinite()) throw InputError("emission table contains non-finite entries");

  Eigen::MatrixXd likelihood(segments, m);
  Eigen::VectorXd row_shift(segments);
  for (Eigen::Index i = 0; i < segments; ++i) {
    row_shift(i) = emissions.row(i).maxCoeff();
    likelihood.row(i) = (emissions.row(i).array() - row_shift(i)).exp();
  }

  Eigen::MatrixXd alpha(segments, m);
  double log_evidence = 0.0;
  Eigen::RowVectorXd prior = model.initial.transpose();
  for (Eigen::Index i = 0; i < segments; ++i) {
    if (i > 0) prior = alpha.row(i - 1) * model.transitions;
    alpha.row(i) = prior.array() * likelihood.row(i).array();
    const double norm = alpha.row(i).sum();
    if (!(norm > 0.0)) {
      throw NumericalError("forward pass lost all probability mass at segment " + std::to_string(i), {});
    }
    alpha.row(i) /= norm;
    log_evidence += std::log(norm) + row_shift(i);
  }

  PosteriorMarginals out;
  out.gamma.resize(segments, m);
  out.gamma.row(segments - 1) = alpha.row(segments - 1);
  Eigen::VectorXd beta = Eigen::VectorXd::Ones(m);
  for (Eigen::Index i = segments - 2; i >= 0; --i) {
    const Eigen::VectorXd next = likelihood.row(i + 1).transpose().cwiseProduct(beta);
    beta = model.transitions * next;
    beta /= beta.sum();
    const Eigen::RowVectorXd g = alpha.row(i).cwiseProduct(beta.transpose());
    out.gamma.row(i) = g / g.sum();
  }
  out.log_evidence = log_evidence;
  return out;
}

/// Posterior-mean state per segment.
inline std::vector<double> point_estimate_mean(const PosteriorMarginals& marginals, const StateGrid& grid) {
  const Eigen::Map<const Eigen::VectorXd> values(grid.values().data(),
                                                 static_cast<Eigen::Index>(grid.size()));
  const Eigen::VectorXd est = marginals.gamma * values;
  return {est.data(), est.data() + est.size()};
}

/// Posterior-mode state per segment; ties go to the lower grid index.
inline std::vector<double> point_estimate_mode(const PosteriorMarginals& marginals, const StateGrid& grid) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(marginals.gamma.rows()));
  for (Eigen::Index i = 0; i < marginals.gamma.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < marginals.gamma.cols(); ++a) {
      if (marginals.gamma(i, a) > marginals.gamma(i, best)) best = a;
    }
    out.push_back(grid[static_cast<std::size_t>(best)]);
  }
  return out;
}

}  // namespace lcgp
