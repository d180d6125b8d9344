#pragma once

#include "tvparx/diagnostics.hpp"
#include "tvparx/error.hpp"
#include "tvparx/estimation.hpp"
#include "tvparx/filter.hpp"
#include "tvparx/model.hpp"
#include "tvparx/montecarlo.hpp"
#include "tvparx/optimize.hpp"
#include "tvparx/parallel.hpp"
#include "tvparx/poisson.hpp"
#include "tvparx/rng.hpp"
#include "tvparx/simulate.hpp"
#include "tvparx/transform.hpp"
