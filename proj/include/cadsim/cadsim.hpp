#pragma once

#include "cadsim/cad.hpp"
#include "cadsim/error.hpp"
#include "cadsim/fixture.hpp"
#include "cadsim/geometry.hpp"
#include "cadsim/json_io.hpp"
#include "cadsim/kinematics.hpp"
#include "cadsim/metrics.hpp"
#include "cadsim/predictors.hpp"
#include "cadsim/rng.hpp"
#include "cadsim/rollout.hpp"
#include "cadsim/scenario.hpp"
