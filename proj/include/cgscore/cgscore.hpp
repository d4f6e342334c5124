#pragma once

#include "cgscore/analysis.hpp"
#include "cgscore/dataset.hpp"
#include "cgscore/kernel.hpp"
#include "cgscore/linalg.hpp"
#include "cgscore/multiclass.hpp"
#include "cgscore/parallel.hpp"
#include "cgscore/rng.hpp"
#include "cgscore/scoring.hpp"
#include "cgscore/version.hpp"
