#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "navlab/kinematics.hpp"
#include "navlab/scenario.hpp"

namespace navlab {

// Inverse-distance denominators are clamped below this value; evaluation
// records that clamping fired so callers can mark the result as degenerate.
constexpr double kDistanceClampEps = 1e-3;

struct CostDiagnostics {
  bool clamped = false;
  int clamp_count = 0;

  void flag() {
    clamped = true;
    ++clamp_count;
  }
};

namespace detail {

inline double planar_distance(double ax, double ay, double bx, double by) {
  const double dx = ax - bx;
  const double dy = ay - by;
  return std::sqrt(dx * dx + dy * dy);
}

// Accumulates terms and sums them in sorted order, so the total depends only
// on the multiset of terms and not on vehicle labeling.
class CanonicalSum {
 public:
  void add(double term) { terms_.push_back(term); }

  double total() {
    std::sort(terms_.begin(), terms_.end());
    double s = 0.0;
    for (double t : terms_) s += t;
    return s;
  }

 private:
  std::vector<double> terms_;
};

}  // namespace detail

// Summed pose error over rollout rows 1..H (row 0 is the current state and
// carries no cost).
inline double target_cost(const StateSeq& states, const Scenario& sc,
                          const CostWeights& w) {
  detail::CanonicalSum sum;
  for (std::size_t t = 1; t < states.size(); ++t) {
    const StateRow& row = states[t];
    for (std::size_t i = 0; i < row.size(); ++i) {
      const TargetPose& tgt = sc.vehicles[i].target;
      sum.add(detail::planar_distance(row[i].x, row[i].y, tgt.x, tgt.y) * w.w_pos);
      sum.add(std::fabs(wrap_angle(row[i].theta - tgt.theta)) * w.w_orient);
    }
  }
  return sum.total();
}

// Inverse-distance penalty over vehicle pairs closer than r_mar_veh.
inline double vehicle_collision_cost(const StateSeq& states, const Margins& m,
                                     const CostWeights& w,
                                     CostDiagnostics* diag = nullptr) {
  detail::CanonicalSum sum;
  for (std::size_t t = 1; t < states.size(); ++t) {
    const StateRow& row = states[t];
    for (std::size_t i = 0; i + 1 < row.size(); ++i) {
      for (std::size_t j = i + 1; j < row.size(); ++j) {
        double d = detail::planar_distance(row[i].x, row[i].y, row[j].x, row[j].y);
        if (d >= m.r_mar_veh) continue;
        if (d < kDistanceClampEps) {
          d = kDistanceClampEps;
          if (diag) diag->flag();
        }
        sum.add((1.0 / d - 1.0 / m.r_mar_veh) * w.w_col_veh);
      }
    }
  }
  return sum.total();
}

// Penalty when the gap between a vehicle and an obstacle circle drops below
// r_mar_obs.
inline double obstacle_collision_cost(const StateSeq& states,
                                      const std::vector<Obstacle>& obstacles,
                                      const Margins& m, const CostWeights& w,
                                      CostDiagnostics* diag = nullptr) {
  detail::CanonicalSum sum;
  for (std::size_t t = 1; t < states.size(); ++t) {
    const StateRow& row = states[t];
    for (std::size_t i = 0; i < row.size(); ++i) {
      for (const Obstacle& obs : obstacles) {
        const double d = detail::planar_distance(row[i].x, row[i].y, obs.x, obs.y);
        double gap = d - obs.r;
        if (gap >= m.r_mar_obs) continue;
        if (gap < kDistanceClampEps) {
          gap = kDistanceClampEps;
          if (diag) diag->flag();
        }
        sum.add((1.0 / gap - 1.0 / m.r_mar_obs) * w.w_col_obs);
      }
    }
  }
  return sum.total();
}

// Hinge on speed magnitude above v_mar.
inline double velocity_cost(const StateSeq& states, const Margins& m,
                            const CostWeights& w) {
  detail::CanonicalSum sum;
  for (std::size_t t = 1; t < states.size(); ++t) {
    for (const VehicleState& s : states[t]) {
      const double excess = std::fabs(s.v) - m.v_mar;
      if (excess > 0.0) sum.add(excess * w.w_vel);
    }
  }
  return sum.total();
}

inline double stage_costs(const StateSeq& states, const Scenario& sc,
                          const CostWeights& w, const Margins& m,
                          CostDiagnostics* diag = nullptr) {
  return target_cost(states, sc, w) +
         vehicle_collision_cost(states, m, w, diag) +
         obstacle_collision_cost(states, sc.obstacles, m, w, diag) +
         velocity_cost(states, m, w);
}

// Objective for the planner: roll the controls out from `current` and sum the
// four stage costs.
inline double total_cost(const ControlSeq& controls, const Scenario& sc,
                         const StateRow& current, const KinematicParams& kin,
                         const CostWeights& w, const Margins& m,
                         CostDiagnostics* diag = nullptr) {
  const StateSeq states = rollout(current, controls, kin);
  return stage_costs(states, sc, w, m, diag);
}

inline double total_cost(const ControlSeq& controls, const Scenario& sc,
                         const KinematicParams& kin, const CostWeights& w,
                         const Margins& m, CostDiagnostics* diag = nullptr) {
  return total_cost(controls, sc, start_states(sc), kin, w, m, diag);
}

namespace detail {

struct StateAdjoint {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
};

// d(stage costs at this row)/d(state row), accumulated into adj. Indicator
// and hinge terms are treated as constant on their active set; clamped
// denominators contribute zero gradient (the evaluated cost is locally flat
// there).
inline void accumulate_stage_gradient(const StateRow& row, const Scenario& sc,
                                      const CostWeights& w, const Margins& m,
                                      std::vector<StateAdjoint>& adj,
                                      CostDiagnostics* diag) {
  const std::size_t n = row.size();
  for (std::size_t i = 0; i < n; ++i) {
    const TargetPose& tgt = sc.vehicles[i].target;
    const double dx = row[i].x - tgt.x;
    const double dy = row[i].y - tgt.y;
    const double dist = std::sqrt(dx * dx + dy * dy);
    if (dist > 1e-12) {
      adj[i].x += w.w_pos * dx / dist;
      adj[i].y += w.w_pos * dy / dist;
    }
    const double dth = wrap_angle(row[i].theta - tgt.theta);
    if (dth > 0.0) {
      adj[i].theta += w.w_orient;
    } else if (dth < 0.0) {
      adj[i].theta -= w.w_orient;
    }
    const double excess = std::fabs(row[i].v) - m.v_mar;
    if (excess > 0.0) adj[i].v += (row[i].v > 0.0 ? w.w_vel : -w.w_vel);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = row[i].x - row[j].x;
      const double dy = row[i].y - row[j].y;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d >= m.r_mar_veh) continue;
      if (d < kDistanceClampEps) {
        if (diag) diag->flag();
        continue;  // cost is clamped flat here
      }
      const double coeff = -w.w_col_veh / (d * d * d);
      adj[i].x += coeff * dx;
      adj[i].y += coeff * dy;
      adj[j].x -= coeff * dx;
      adj[j].y -= coeff * dy;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (const Obstacle& obs : sc.obstacles) {
      const double dx = row[i].x - obs.x;
      const double dy = row[i].y - obs.y;
      const double d = std::sqrt(dx * dx + dy * dy);
      const double gap = d - obs.r;
      if (gap >= m.r_mar_obs) continue;
      if (gap < kDistanceClampEps || d < kDistanceClampEps) {
        if (diag) diag->flag();
        continue;
      }
      const double coeff = -w.w_col_obs / (gap * gap * d);
      adj[i].x += coeff * dx;
      adj[i].y += coeff * dy;
    }
  }
}

}  // namespace detail

// Exact reverse-mode derivative of total_cost with respect to the control
// sequence. Vehicles are decoupled in the dynamics, so the adjoint runs
// per-vehicle; coupling enters only through the stage-cost gradients.
inline ControlSeq total_cost_gradient(const ControlSeq& controls,
                                      const Scenario& sc,
                                      const StateRow& current,
                                      const KinematicParams& kin,
                                      const CostWeights& w, const Margins& m,
                                      CostDiagnostics* diag = nullptr) {
  const StateSeq states = rollout(current, controls, kin);
  const std::size_t horizon = controls.size();
  const std::size_t n = current.size();
  ControlSeq grad(horizon, ControlRow(n));
  std::vector<detail::StateAdjoint> adj(n);

  for (std::size_t t = horizon; t >= 1; --t) {
    detail::accumulate_stage_gradient(states[t], sc, w, m, adj, diag);
    for (std::size_t i = 0; i < n; ++i) {
      const VehicleState& s = states[t - 1][i];  // state the step departed from
      const Control& u = controls[t - 1][i];
      const double cos_phi = std::cos(u.steering);
      grad[t - 1][i].steering =
          adj[i].theta * s.v * kin.gamma_steer * kin.dt / (cos_phi * cos_phi);
      grad[t - 1][i].pedal = adj[i].v * kin.dt;

      detail::StateAdjoint prev;
      const double sin_th = std::sin(s.theta);
      const double cos_th = std::cos(s.theta);
      prev.x = adj[i].x;
      prev.y = adj[i].y;
      prev.theta = adj[i].theta - adj[i].x * s.v * sin_th * kin.dt +
                   adj[i].y * s.v * cos_th * kin.dt;
      prev.v = adj[i].v * kin.beta_decay + adj[i].x * cos_th * kin.dt +
               adj[i].y * sin_th * kin.dt +
               adj[i].theta * std::tan(u.steering) * kin.gamma_steer * kin.dt;
      adj[i] = prev;
    }
  }

  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(grad[t][i].pedal) || !std::isfinite(grad[t][i].steering)) {
        throw std::runtime_error("total_cost_gradient: non-finite component at t=" +
                                 std::to_string(t) + " vehicle=" + std::to_string(i));
      }
    }
  }
  return grad;
}

}  // namespace navlab
