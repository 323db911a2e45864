#pragma once

#include "isorate/errors.hpp"
#include "isorate/convexcore.hpp"
#include "isorate/funcspace.hpp"
#include "isorate/stochastic.hpp"
#include "isorate/models.hpp"
#include "isorate/limitdist.hpp"
#include "isorate/minimax.hpp"
#include "isorate/spec_json.hpp"
#include "isorate/experiment.hpp"
