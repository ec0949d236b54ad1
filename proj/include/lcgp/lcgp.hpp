#pragma once

// Locally coupled Gaussian process regression: stationary local kernels on
// normalized Gaussian windows, with their hyper-parameters smoothed by a
// finite-state hidden Markov chain.

#include "lcgp/coupled.hpp"
#include "lcgp/error.hpp"
#include "lcgp/gp_core.hpp"
#include "lcgp/kernels.hpp"
#include "lcgp/markov.hpp"
#include "lcgp/signals.hpp"
