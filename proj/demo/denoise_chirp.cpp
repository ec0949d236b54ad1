// Tracks the frequency of a noisy chirp and denoises it with the coupled model.
#include <cstdio>

#include "lcgp/lcgp.hpp"

int main() {
  const auto data = lcgp::gen_chirp({.seed = 7});

  const lcgp::CoupledModelConfig config{
      lcgp::FrequencyFamily{0.4},
      lcgp::StateGrid::range(0.1, 12.0, 0.4),
      lcgp::RandomWalkTransition{0.2, 1.0},
      lcgp::WindowParams{0.1, 0.25, 3.0},
      lcgp::NoiseModel::from_std(0.5),
      lcgp::Estimator::Mean,
      std::nullopt,
  };
  const auto result = lcgp::fit(data.noisy, config);

  std::printf("support_s  estimate_hz  true_hz\n");
  for (std::size_t i = 0; i < result.point_estimates.size(); ++i) {
    const double t = result.windows.support_points[i];
    std::printf("%9.2f  %11.2f  %7.2f\n", t, result.point_estimates[i], lcgp::chirp_frequency(t));
  }
  std::printf("correlation with clean signal: %.3f\n",
              lcgp::pearson_correlation(result.regression.posterior_mean, data.clean.values()));
}
