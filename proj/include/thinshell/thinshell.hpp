#pragma once

// Everything at once.

#include "thinshell/config.hpp"
#include "thinshell/density_grid.hpp"
#include "thinshell/experiments.hpp"
#include "thinshell/fft.hpp"
#include "thinshell/gibbs.hpp"
#include "thinshell/hamiltonian.hpp"
#include "thinshell/numeric.hpp"
#include "thinshell/projection.hpp"
#include "thinshell/sampler.hpp"
#include "thinshell/sum_density.hpp"
