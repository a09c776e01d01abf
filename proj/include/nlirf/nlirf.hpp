#pragma once

#include "nlirf/core.hpp"
#include "nlirf/irf_curve.hpp"
#include "nlirf/model_zoo.hpp"
#include "nlirf/kernel_lab.hpp"
#include "nlirf/qmle_dar.hpp"
#include "nlirf/irf_engine.hpp"
#include "nlirf/hermite_decomp.hpp"
#include "nlirf/ident_suite.hpp"
#include "nlirf/rate_bench.hpp"
#include "nlirf/io.hpp"
#include "nlirf/cli.hpp"
