#pragma once

// Umbrella header: simulation of Brownian-driven SDEs on intensity-scaled
// time grids, nested two-level Euler coupling, the asymptotic error
// process, the multilevel Monte Carlo estimator, and the statistical
// verification harness.

#include "imlmc/bsapp.hpp"
#include "imlmc/engine.hpp"
#include "imlmc/grid.hpp"
#include "imlmc/limit.hpp"
#include "imlmc/linalg.hpp"
#include "imlmc/mlmc.hpp"
#include "imlmc/model.hpp"
#include "imlmc/parallel.hpp"
#include "imlmc/quadrature.hpp"
#include "imlmc/random.hpp"
#include "imlmc/stats.hpp"
#include "imlmc/version.hpp"
