#pragma once

#include "rodd/coefficient_model.hpp"
#include "rodd/csv.hpp"
#include "rodd/cube.hpp"
#include "rodd/errors.hpp"
#include "rodd/estimators.hpp"
#include "rodd/evalbench.hpp"
#include "rodd/forest.hpp"
#include "rodd/params_json.hpp"
#include "rodd/rng.hpp"
#include "rodd/scoring.hpp"
#include "rodd/stats.hpp"
#include "rodd/synthgen.hpp"
#include "rodd/version.hpp"
