#pragma once

// Umbrella header for the DAC-MDP toolkit: compile offline experience
// datasets into finite core-state MDPs, solve them exactly with data-parallel
// sparse value iteration, and serve the resulting non-parametric policies.

#include "compiler.hpp"
#include "dataset.hpp"
#include "envs.hpp"
#include "errors.hpp"
#include "harness.hpp"
#include "knn.hpp"
#include "manifest.hpp"
#include "parallel.hpp"
#include "policy.hpp"
#include "random.hpp"
#include "reprs.hpp"
#include "solver.hpp"
#include "synthetic.hpp"
#include "whatif.hpp"
