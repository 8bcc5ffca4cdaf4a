#pragma once

#include "navlab/controllers.hpp"
#include "navlab/costs.hpp"
#include "navlab/evaluation.hpp"
#include "navlab/gnn.hpp"
#include "navlab/kinematics.hpp"
#include "navlab/labeling.hpp"
#include "navlab/mining.hpp"
#include "navlab/optimizer.hpp"
#include "navlab/parallel.hpp"
#include "navlab/report.hpp"
#include "navlab/rng.hpp"
#include "navlab/scenario.hpp"
#include "navlab/simulation.hpp"
#include "navlab/storage.hpp"
