#pragma once

// Umbrella header for the stein-density library.

#include "stein/conditional.hpp"
#include "stein/config.hpp"
#include "stein/csv.hpp"
#include "stein/decomposition.hpp"
#include "stein/density.hpp"
#include "stein/distribution.hpp"
#include "stein/errors.hpp"
#include "stein/expr.hpp"
#include "stein/kernel.hpp"
#include "stein/math.hpp"
#include "stein/parallel.hpp"
#include "stein/pipeline.hpp"
#include "stein/quadrature.hpp"
#include "stein/reference.hpp"
#include "stein/rng.hpp"
