#pragma once

#include <vector>

#include "navlab/kinematics.hpp"

namespace navlab {

// Circular encapsulation of a static obstacle.
struct Obstacle {
  double x = 0.0;
  double y = 0.0;
  double r = 1.0;
};

struct TargetPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct VehicleTask {
  VehicleState start;
  TargetPose target;
};

struct WorldBounds {
  double x_min = -10.0;
  double x_max = 10.0;
  double y_min = -10.0;
  double y_max = 10.0;
};

struct Scenario {
  std::vector<VehicleTask> vehicles;
  std::vector<Obstacle> obstacles;
  WorldBounds bounds;
};

struct CostWeights {
  double w_pos = 1.0;
  double w_orient = 1.0;
  double w_col_veh = 50.0;
  double w_col_obs = 50.0;
  double w_vel = 10.0;
};

struct Margins {
  double r_mar_veh = 3.0;  // m
  double r_mar_obs = 2.0;  // m
  double v_mar = 2.0;      // m/s
};

inline StateRow start_states(const Scenario& sc) {
  StateRow row;
  row.reserve(sc.vehicles.size());
  for (const auto& task : sc.vehicles) row.push_back(task.start);
  return row;
}

}  // namespace navlab
