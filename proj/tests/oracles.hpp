#pragma once

// Test-only reference implementations. These deliberately take the slow,
// direct route (explicit inverses, determinants, path enumeration) and share
// no code with the library paths they check.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// log N(s | 0, cov) from an explicit inverse and determinant.
inline double dense_log_mvn(const Eigen::MatrixXd& cov, const Eigen::VectorXd& s) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  const Eigen::MatrixXd inv = lu.inverse();
  const double det = lu.determinant();
  const auto n = static_cast<double>(s.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * s.dot(inv * s);
}

inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return a * a.transpose() / n + 0.05 * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

struct PathResult {
  Eigen::MatrixXd gamma;
  double log_evidence;
};

/// Exhaustive sum over all m^T state paths.
inline PathResult enumerate_paths(const Eigen::VectorXd& initial, const Eigen::MatrixXd& trans,
                                  const Eigen::MatrixXd& log_emissions) {
  const int steps = static_cast<int>(log_emissions.rows());
  const int m = static_cast<int>(log_emissions.cols());
  std::int64_t total = 1;
  for (int i = 0; i < steps; ++i) total *= m;

  // Shift by the global maximum so the path weights stay representable.
  const double shift = log_emissions.rowwise().maxCoeff().sum();
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(steps, m);
  double z = 0.0;
  std::vector<int> path(steps);
  for (std::int64_t code = 0; code < total; ++code) {
    std::int64_t c = code;
    for (int i = 0; i < steps; ++i) {
      path[i] = static_cast<int>(c % m);
      c /= m;
    }
    double logw = std::log(initial(path[0])) + log_emissions(0, path[0]);
    for (int i = 1; i < steps; ++i) {
      logw += std::log(trans(path[i - 1], path[i])) + log_emissions(i, path[i]);
    }
    const double w = std::exp(logw - shift);
    z += w;
    for (int i = 0; i < steps; ++i) gamma(i, path[i]) += w;
  }
  return {gamma / z, std::log(z) + shift};
}

inline Eigen::MatrixXd random_stochastic(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd t(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) t(a, b) = u(rng);
    t.row(a) /= t.row(a).sum();
  }
  return t;
}

}  // namespace oracle
