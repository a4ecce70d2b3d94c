#pragma once

// Branching processes in i.i.d. random environments: exact truncated
// kernels, small-value series, lower-deviation rate functions, tilted
// Monte Carlo, and the limit constants tying them together.

#include "bpre/csv.hpp"
#include "bpre/diagnostics.hpp"
#include "bpre/env_model.hpp"
#include "bpre/errors.hpp"
#include "bpre/exact_engine.hpp"
#include "bpre/limit_constants.hpp"
#include "bpre/monte_carlo.hpp"
#include "bpre/parallel.hpp"
#include "bpre/rate_fn.hpp"
#include "bpre/rng.hpp"
#include "bpre/small_value.hpp"
