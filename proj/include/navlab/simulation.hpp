#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "navlab/kinematics.hpp"
#include "navlab/rng.hpp"
#include "navlab/scenario.hpp"

namespace navlab {

struct SimConfig {
  int max_steps = 120;
  double pos_threshold = 1.25;     // m
  double orient_threshold = 0.2;   // rad
  double vehicle_radius = 1.0;     // m, contact circle
  std::uint64_t seed = 0;
};

struct CollisionEvent {
  enum class Kind : std::uint8_t { vehicle_vehicle = 0, vehicle_obstacle = 1 };
  int timestep = 0;
  Kind kind = Kind::vehicle_vehicle;
  int a = 0;  // vehicle index
  int b = 0;  // other vehicle index, or obstacle index
};

struct TrajectoryLog {
  StateSeq states;    // [0..T][vehicle]
  ControlSeq controls;  // [0..T-1][vehicle], as executed (post clamp)
  std::vector<CollisionEvent> events;
  std::vector<std::uint8_t> reached;  // per vehicle
  double distance_traveled = 0.0;     // summed over all vehicles and steps
};

using Controller = std::function<ControlRow(const Scenario&, const StateRow&)>;
using ControllerFactory = std::function<Controller()>;

struct GenConstraints {
  double min_start_sep = 3.0;     // pairwise, > r_mar_veh
  double min_target_sep = 2.5;    // pairwise, 2 x pos_threshold
  double obstacle_clear = 2.0;    // start/target gap to obstacle circles
  double max_target_dist = 24.0;  // keeps goals reachable inside the episode
  double obstacle_r_min = 0.8;
  double obstacle_r_max = 2.0;
  double bounds_margin = 1.0;
  int max_tries_per_entity = 4000;
};

// Uniform rejection sampling until the scenario invariants hold.
// Deterministic for a given rng state.
inline Scenario generate_scenario(int n_vehicles, int n_obstacles,
                                  const WorldBounds& bounds, Rng& rng,
                                  const GenConstraints& gc = {}) {
  Scenario sc;
  sc.bounds = bounds;
  const double x_lo = bounds.x_min + gc.bounds_margin;
  const double x_hi = bounds.x_max - gc.bounds_margin;
  const double y_lo = bounds.y_min + gc.bounds_margin;
  const double y_hi = bounds.y_max - gc.bounds_margin;
  if (x_lo >= x_hi || y_lo >= y_hi) {
    throw std::invalid_argument("generate_scenario: bounds too small");
  }
  auto dist2 = [](double ax, double ay, double bx, double by) {
    const double dx = ax - bx;
    const double dy = ay - by;
    return dx * dx + dy * dy;
  };

  for (int j = 0; j < n_obstacles; ++j) {
    Obstacle o;
    o.x = rng.uniform(x_lo, x_hi);
    o.y = rng.uniform(y_lo, y_hi);
    o.r = rng.uniform(gc.obstacle_r_min, gc.obstacle_r_max);
    sc.obstacles.push_back(o);
  }

  auto clear_of_obstacles = [&](double x, double y) {
    for (const Obstacle& o : sc.obstacles) {
      const double need = o.r + gc.obstacle_clear;
      if (dist2(x, y, o.x, o.y) < need * need) return false;
    }
    return true;
  };

  for (int i = 0; i < n_vehicles; ++i) {
    VehicleTask task;
    bool placed = false;
    for (int attempt = 0; attempt < gc.max_tries_per_entity; ++attempt) {
      const double sx = rng.uniform(x_lo, x_hi);
      const double sy = rng.uniform(y_lo, y_hi);
      if (!clear_of_obstacles(sx, sy)) continue;
      bool ok = true;
      for (const VehicleTask& other : sc.vehicles) {
        if (dist2(sx, sy, other.start.x, other.start.y) <=
            gc.min_start_sep * gc.min_start_sep) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;

      const double tx = rng.uniform(x_lo, x_hi);
      const double ty = rng.uniform(y_lo, y_hi);
      if (!clear_of_obstacles(tx, ty)) continue;
      if (dist2(sx, sy, tx, ty) > gc.max_target_dist * gc.max_target_dist) continue;
      if (dist2(sx, sy, tx, ty) < gc.min_target_sep * gc.min_target_sep) continue;
      for (const VehicleTask& other : sc.vehicles) {
        if (dist2(tx, ty, other.target.x, other.target.y) <
            gc.min_target_sep * gc.min_target_sep) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;

      task.start = {sx, sy, rng.uniform(-kPi, kPi), 0.0};
      task.target = {tx, ty, rng.uniform(-kPi, kPi)};
      placed = true;
      break;
    }
    if (!placed) {
      throw std::runtime_error(
          "generate_scenario: placement budget exhausted for vehicle " +
          std::to_string(i) + "; enlarge the world bounds");
    }
    sc.vehicles.push_back(task);
  }
  return sc;
}

// One event per pair per contact onset: a transition from non-contact to
// contact. A pair already in contact at t=0 counts as an onset at 0.
inline std::vector<CollisionEvent> detect_collisions(const StateSeq& states,
                                                     const Scenario& sc,
                                                     const SimConfig& cfg) {
  std::vector<CollisionEvent> events;
  if (states.empty()) return events;
  const std::size_t n = states[0].size();
  const std::size_t n_obs = sc.obstacles.size();

  std::vector<std::uint8_t> veh_contact(n * n, 0);
  std::vector<std::uint8_t> obs_contact(n * n_obs, 0);

  for (std::size_t t = 0; t < states.size(); ++t) {
    const StateRow& row = states[t];
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = row[i].x - row[j].x;
        const double dy = row[i].y - row[j].y;
        const bool contact = std::sqrt(dx * dx + dy * dy) < 2.0 * cfg.vehicle_radius;
        std::uint8_t& prev = veh_contact[i * n + j];
        if (contact && !prev) {
          events.push_back({static_cast<int>(t),
                            CollisionEvent::Kind::vehicle_vehicle,
                            static_cast<int>(i), static_cast<int>(j)});
        }
        prev = contact ? 1 : 0;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n_obs; ++j) {
        const Obstacle& o = sc.obstacles[j];
        const double dx = row[i].x - o.x;
        const double dy = row[i].y - o.y;
        const bool contact =
            std::sqrt(dx * dx + dy * dy) < cfg.vehicle_radius + o.r;
        std::uint8_t& prev = obs_contact[i * n_obs + j];
        if (contact && !prev) {
          events.push_back({static_cast<int>(t),
                            CollisionEvent::Kind::vehicle_obstacle,
                            static_cast<int>(i), static_cast<int>(j)});
        }
        prev = contact ? 1 : 0;
      }
    }
  }
  return events;
}

inline double path_length(const StateSeq& states) {
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    for (std::size_t i = 0; i < states[t].size(); ++i) {
      const double dx = states[t + 1][i].x - states[t][i].x;
      const double dy = states[t + 1][i].y - states[t][i].y;
      total += std::sqrt(dx * dx + dy * dy);
    }
  }
  return total;
}

// Per-vehicle success: inside both thresholds at the final step and not a
// participant in any collision event.
inline std::vector<std::uint8_t> reached_flags(const StateSeq& states,
                                               const Scenario& sc,
                                               const std::vector<CollisionEvent>& events,
                                               const SimConfig& cfg) {
  const std::size_t n = sc.vehicles.size();
  std::vector<std::uint8_t> reached(n, 0);
  if (states.empty()) return reached;
  const StateRow& last = states.back();
  for (std::size_t i = 0; i < n; ++i) {
    const TargetPose& tgt = sc.vehicles[i].target;
    const double dx = last[i].x - tgt.x;
    const double dy = last[i].y - tgt.y;
    const bool close = std::sqrt(dx * dx + dy * dy) <= cfg.pos_threshold;
    const bool aligned =
        std::fabs(wrap_angle(last[i].theta - tgt.theta)) <= cfg.orient_threshold;
    reached[i] = close && aligned ? 1 : 0;
  }
  for (const CollisionEvent& ev : events) {
    if (ev.a >= 0 && ev.a < static_cast<int>(n)) reached[ev.a] = 0;
    if (ev.kind == CollisionEvent::Kind::vehicle_vehicle && ev.b >= 0 &&
        ev.b < static_cast<int>(n)) {
      reached[ev.b] = 0;
    }
  }
  return reached;
}

inline TrajectoryLog run_closed_loop(const Controller& controller,
                                     const Scenario& sc, const SimConfig& cfg,
                                     const KinematicParams& kin) {
  TrajectoryLog log;
  const std::size_t n = sc.vehicles.size();
  log.states.reserve(cfg.max_steps + 1);
  log.controls.reserve(cfg.max_steps);
  log.states.push_back(start_states(sc));

  for (int t = 0; t < cfg.max_steps; ++t) {
    ControlRow u = controller(sc, log.states.back());
    if (u.size() != n) {
      throw std::runtime_error("run_closed_loop: controller returned " +
                               std::to_string(u.size()) + " controls at t=" +
                               std::to_string(t));
    }
    StateRow next(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(u[i].pedal) || !std::isfinite(u[i].steering)) {
        throw std::runtime_error(
            "run_closed_loop: non-finite control at t=" + std::to_string(t) +
            " vehicle=" + std::to_string(i));
      }
      u[i] = clamp_control(u[i], kin);
      next[i] = step(log.states.back()[i], u[i], kin);
    }
    log.controls.push_back(std::move(u));
    log.states.push_back(std::move(next));
  }

  log.events = detect_collisions(log.states, sc, cfg);
  log.reached = reached_flags(log.states, sc, log.events, cfg);
  log.distance_traveled = path_length(log.states);
  return log;
}

}  // namespace navlab
