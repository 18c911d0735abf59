#pragma once

#include "bvr/dataio.hpp"
#include "bvr/estimation.hpp"
#include "bvr/gof.hpp"
#include "bvr/inference.hpp"
#include "bvr/math.hpp"
#include "bvr/model.hpp"
#include "bvr/rng.hpp"
#include "bvr/simulation.hpp"
