#pragma once

#include "analytic.hpp"
#include "cavity.hpp"
#include "errors.hpp"
#include "experiments.hpp"
#include "fit.hpp"
#include "io.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "service.hpp"
#include "stats.hpp"
#include "tail.hpp"
