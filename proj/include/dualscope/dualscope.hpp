// Umbrella header.
#pragma once

#include "dualscope/control.hpp"
#include "dualscope/diagnostics.hpp"
#include "dualscope/duality.hpp"
#include "dualscope/filter.hpp"
#include "dualscope/io.hpp"
#include "dualscope/linalg.hpp"
#include "dualscope/observability.hpp"
#include "dualscope/parallel.hpp"
#include "dualscope/rng.hpp"
#include "dualscope/simulate.hpp"
#include "dualscope/types.hpp"
