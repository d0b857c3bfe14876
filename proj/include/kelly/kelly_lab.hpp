#pragma once

// Umbrella header.

#include "kelly/condensation.hpp"
#include "kelly/counter_rng.hpp"
#include "kelly/expectation.hpp"
#include "kelly/figures.hpp"
#include "kelly/gauss_hermite.hpp"
#include "kelly/io.hpp"
#include "kelly/kelly_solver.hpp"
#include "kelly/lef.hpp"
#include "kelly/markowitz.hpp"
#include "kelly/model.hpp"
#include "kelly/reports.hpp"
#include "kelly/simulate.hpp"
