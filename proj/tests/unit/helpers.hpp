#pragma once

#include <cmath>
#include <vector>

#include "navlab/costs.hpp"
#include "navlab/kinematics.hpp"
#include "navlab/optimizer.hpp"
#include "navlab/rng.hpp"
#include "navlab/scenario.hpp"

namespace navlab::testing {

// Independent oracle: central finite differences of total_cost over every
// control entry.
inline ControlSeq fd_cost_gradient(const ControlSeq& controls,
                                   const Scenario& sc, const StateRow& current,
                                   const KinematicParams& kin,
                                   const CostWeights& w, const Margins& m,
                                   double h = 1e-5) {
  ControlSeq g = controls;
  ControlSeq probe = controls;
  for (std::size_t t = 0; t < controls.size(); ++t) {
    for (std::size_t i = 0; i < controls[t].size(); ++i) {
      probe[t][i].pedal = controls[t][i].pedal + h;
      const double fp = total_cost(probe, sc, current, kin, w, m);
      probe[t][i].pedal = controls[t][i].pedal - h;
      const double fm = total_cost(probe, sc, current, kin, w, m);
      probe[t][i].pedal = controls[t][i].pedal;
      g[t][i].pedal = (fp - fm) / (2.0 * h);

      probe[t][i].steering = controls[t][i].steering + h;
      const double sp = total_cost(probe, sc, current, kin, w, m);
      probe[t][i].steering = controls[t][i].steering - h;
      const double sm = total_cost(probe, sc, current, kin, w, m);
      probe[t][i].steering = controls[t][i].steering;
      g[t][i].steering = (sp - sm) / (2.0 * h);
    }
  }
  return g;
}

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

inline double max_grad_rel_err(const ControlSeq& a, const ControlSeq& b) {
  double worst = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      worst = std::max(worst, rel_err(a[t][i].pedal, b[t][i].pedal));
      worst = std::max(worst, rel_err(a[t][i].steering, b[t][i].steering));
    }
  }
  return worst;
}

struct RandomInstance {
  Scenario scenario;
  StateRow states;
  ControlSeq controls;
};

// Random planning instance for gradient checks. Returns false when the
// rollout passes too close to an indicator boundary, a singularity clamp, or
// an angle-wrap kink, so callers can skip to the next seed.
inline bool make_clean_instance(std::uint64_t seed, int n_vehicles,
                                int n_obstacles, int horizon,
                                const KinematicParams& kin, const Margins& m,
                                RandomInstance& out, double guard = 1e-3) {
  Rng rng(seed);
  Scenario sc;
  sc.bounds = {-15, 15, -15, 15};
  for (int i = 0; i < n_vehicles; ++i) {
    VehicleTask task;
    task.start = {rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-2.0, 2.0),
                  rng.uniform(-1.5, 1.5)};
    task.target = {rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-2.0, 2.0)};
    sc.vehicles.push_back(task);
  }
  for (int j = 0; j < n_obstacles; ++j) {
    sc.obstacles.push_back(
        {rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(0.8, 1.5)});
  }
  ControlSeq controls(horizon, ControlRow(n_vehicles));
  for (auto& row : controls) {
    for (auto& u : row) {
      u.pedal = rng.uniform(-0.8 * kin.pedal_max, 0.8 * kin.pedal_max);
      u.steering = rng.uniform(-0.8 * kin.phi_max, 0.8 * kin.phi_max);
    }
  }
  const StateRow start = start_states(sc);
  const StateSeq states = rollout(start, controls, kin);

  for (std::size_t t = 1; t < states.size(); ++t) {
    const StateRow& row = states[t];
    for (std::size_t i = 0; i < row.size(); ++i) {
      const TargetPose& tgt = sc.vehicles[i].target;
      const double dx = row[i].x - tgt.x;
      const double dy = row[i].y - tgt.y;
      if (std::sqrt(dx * dx + dy * dy) < guard) return false;
      const double dth = std::fabs(wrap_angle(row[i].theta - tgt.theta));
      if (dth < guard || dth > kPi - guard) return false;
      if (std::fabs(std::fabs(row[i].v) - m.v_mar) < guard) return false;
      for (std::size_t j = i + 1; j < row.size(); ++j) {
        const double ddx = row[i].x - row[j].x;
        const double ddy = row[i].y - row[j].y;
        const double d = std::sqrt(ddx * ddx + ddy * ddy);
        if (std::fabs(d - m.r_mar_veh) < guard) return false;
        if (d < kDistanceClampEps + guard) return false;
      }
      for (const Obstacle& o : sc.obstacles) {
        const double ddx = row[i].x - o.x;
        const double ddy = row[i].y - o.y;
        const double gap = std::sqrt(ddx * ddx + ddy * ddy) - o.r;
        if (std::fabs(gap - m.r_mar_obs) < guard) return false;
        if (gap < kDistanceClampEps + guard) return false;
      }
    }
  }
  out.scenario = std::move(sc);
  out.states = start;
  out.controls = std::move(controls);
  return true;
}

}  // namespace navlab::testing
