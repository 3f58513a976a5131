#pragma once

#include "hypertune/allocator.hpp"
#include "hypertune/cli.hpp"
#include "hypertune/config.hpp"
#include "hypertune/engine.hpp"
#include "hypertune/executor.hpp"
#include "hypertune/measurement.hpp"
#include "hypertune/objectives.hpp"
#include "hypertune/random_forest.hpp"
#include "hypertune/rng.hpp"
#include "hypertune/scheduler.hpp"
#include "hypertune/search_space.hpp"
#include "hypertune/subprocess.hpp"
#include "hypertune/surrogate.hpp"
#include "hypertune/tabular.hpp"
#include "hypertune/trajectory_io.hpp"
