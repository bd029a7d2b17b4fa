#pragma once

#include "iot/adam.hpp"
#include "iot/checkpoint.hpp"
#include "iot/config.hpp"
#include "iot/cost.hpp"
#include "iot/dataset.hpp"
#include "iot/ebm_solver.hpp"
#include "iot/io.hpp"
#include "iot/light_solver.hpp"
#include "iot/metrics.hpp"
#include "iot/mlp.hpp"
#include "iot/numerics.hpp"
#include "iot/ot_data.hpp"
#include "iot/potential.hpp"
