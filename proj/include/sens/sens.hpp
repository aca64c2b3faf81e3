// Umbrella header.

#pragma once

#include "special_math.hpp"
#include "rng.hpp"
#include "sample_construction.hpp"
#include "density_estimation.hpp"
#include "scoring.hpp"
#include "fdr_control.hpp"
#include "baselines.hpp"
#include "simulation.hpp"
#include "io.hpp"
