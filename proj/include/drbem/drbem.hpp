#pragma once

// Everything: disturbance model, plant, robust LP compiler, LP solvers,
// closed-loop simulation and the experiment driver.

#include "drbem/error.hpp"
#include "drbem/stats.hpp"
#include "drbem/dist_model.hpp"
#include "drbem/plant.hpp"
#include "drbem/lp.hpp"
#include "drbem/lp_solve.hpp"
#include "drbem/compile.hpp"
#include "drbem/sim.hpp"
#include "drbem/experiment.hpp"
