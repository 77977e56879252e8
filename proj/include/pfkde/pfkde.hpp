#pragma once

// Umbrella header: particle filtering, kernel density estimation of the
// filtering densities, exact oracles, and the quantitative analysis layer.

#include "pfkde/common.hpp"
#include "pfkde/rng.hpp"
#include "pfkde/quadrature.hpp"
#include "pfkde/linalg.hpp"
#include "pfkde/model.hpp"
#include "pfkde/pf.hpp"
#include "pfkde/kernels.hpp"
#include "pfkde/kde.hpp"
#include "pfkde/oracle.hpp"
#include "pfkde/analysis.hpp"
