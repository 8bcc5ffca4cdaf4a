#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace navlab {

constexpr double kPi = 3.14159265358979323846;

// Normalize an angle to (-pi, pi]. Angles already in range pass through
// unchanged so repeated normalization is exact.
inline double wrap_angle(double a) {
  if (a > -kPi && a <= kPi) return a;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

struct VehicleState {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double theta = 0.0;  // rad, kept in (-pi, pi]
  double v = 0.0;      // m/s, signed
};

struct Control {
  double pedal = 0.0;     // m/s^2
  double steering = 0.0;  // rad
};

struct KinematicParams {
  double dt = 0.2;            // s
  double beta_decay = 0.95;   // velocity retention per step
  double gamma_steer = 0.5;   // steering gain, 1/m
  double phi_max = kPi / 4.0;
  double pedal_max = 1.0;
};

inline Control clamp_control(const Control& u, const KinematicParams& p) {
  Control c = u;
  if (c.pedal > p.pedal_max) c.pedal = p.pedal_max;
  if (c.pedal < -p.pedal_max) c.pedal = -p.pedal_max;
  if (c.steering > p.phi_max) c.steering = p.phi_max;
  if (c.steering < -p.phi_max) c.steering = -p.phi_max;
  return c;
}

// Bicycle-model update. Caller is responsible for clamping the control.
inline VehicleState step(const VehicleState& s, const Control& u,
                         const KinematicParams& p) {
  VehicleState n;
  n.x = s.x + s.v * std::cos(s.theta) * p.dt;
  n.y = s.y + s.v * std::sin(s.theta) * p.dt;
  n.theta = wrap_angle(s.theta + s.v * std::tan(u.steering) * p.gamma_steer * p.dt);
  n.v = p.beta_decay * s.v + u.pedal * p.dt;
  return n;
}

using StateRow = std::vector<VehicleState>;  // all vehicles at one timestep
using ControlRow = std::vector<Control>;
using StateSeq = std::vector<StateRow>;      // [timestep][vehicle]
using ControlSeq = std::vector<ControlRow>;  // [timestep][vehicle]

// Propagate every vehicle independently for H steps. Row 0 of the result is
// the initial state row; row t+1 is step() applied to row t.
inline StateSeq rollout(const StateRow& initial, const ControlSeq& controls,
                        const KinematicParams& p) {
  const std::size_t n = initial.size();
  for (std::size_t t = 0; t < controls.size(); ++t) {
    if (controls[t].size() != n) {
      throw std::invalid_argument(
          "rollout: control row " + std::to_string(t) + " has " +
          std::to_string(controls[t].size()) + " vehicles, expected " +
          std::to_string(n));
    }
  }
  StateSeq states;
  states.reserve(controls.size() + 1);
  states.push_back(initial);
  for (std::size_t t = 0; t < controls.size(); ++t) {
    StateRow row(n);
    for (std::size_t i = 0; i < n; ++i) {
      row[i] = step(states.back()[i], controls[t][i], p);
    }
    states.push_back(std::move(row));
  }
  return states;
}

inline ControlSeq zero_controls(int horizon, std::size_t n_vehicles) {
  return ControlSeq(static_cast<std::size_t>(horizon), ControlRow(n_vehicles));
}

}  // namespace navlab
