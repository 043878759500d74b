#pragma once

#include "phi42/config.hpp"
#include "phi42/core.hpp"
#include "phi42/corr_field.hpp"
#include "phi42/experiment_config.hpp"
#include "phi42/fft.hpp"
#include "phi42/gauss_kernels.hpp"
#include "phi42/grid.hpp"
#include "phi42/io.hpp"
#include "phi42/lattice_noise.hpp"
#include "phi42/lollipop_engine.hpp"
#include "phi42/mc_experiments.hpp"
#include "phi42/quadrature.hpp"
#include "phi42/regular_part.hpp"
#include "phi42/renorm_trees.hpp"
#include "phi42/rng.hpp"
#include "phi42/statistics.hpp"
#include "phi42/studies.hpp"
#include "phi42/wick_calculus.hpp"
