#pragma once

// Umbrella header: the whole library.

#include "enpi/baselines.hpp"
#include "enpi/config.hpp"
#include "enpi/core.hpp"
#include "enpi/csv.hpp"
#include "enpi/datagen.hpp"
#include "enpi/ensemble.hpp"
#include "enpi/eval.hpp"
#include "enpi/regressors.hpp"
#include "enpi/rng.hpp"
#include "enpi/runner.hpp"
