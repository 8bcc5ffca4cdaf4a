#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "navlab/optimizer.hpp"

using namespace navlab;
using namespace navlab::testing;

namespace {

bool controls_in_box(const ControlSeq& c, const KinematicParams& kin) {
  for (const auto& row : c) {
    for (const auto& u : row) {
      if (std::fabs(u.pedal) > kin.pedal_max) return false;
      if (std::fabs(u.steering) > kin.phi_max) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("shift_warm_start: H=1 is the identity") {
  ControlSeq prev{{{0.4, -0.1}}};
  const ControlSeq shifted = shift_warm_start(prev);
  REQUIRE(shifted.size() == 1);
  CHECK(shifted[0][0].pedal == 0.4);
  CHECK(shifted[0][0].steering == -0.1);
}

TEST_CASE("shift_warm_start: rows advance and the last row repeats") {
  ControlSeq prev{{{1, 0}}, {{2, 0}}, {{3, 0}}};
  const ControlSeq shifted = shift_warm_start(prev);
  REQUIRE(shifted.size() == 3);
  CHECK(shifted[0][0].pedal == 2);
  CHECK(shifted[1][0].pedal == 3);
  CHECK(shifted[2][0].pedal == 3);
}

TEST_CASE("shift_warm_start: all-zero input is a fixed point") {
  const ControlSeq shifted = shift_warm_start(zero_controls(5, 2));
  for (const auto& row : shifted) {
    for (const auto& u : row) {
      CHECK(u.pedal == 0.0);
      CHECK(u.steering == 0.0);
    }
  }
}

TEST_CASE("optimize: vehicle already at its target stays put") {
  SolverSetup setup;
  Scenario sc;
  sc.vehicles.push_back({{2, 3, 0.5, 0}, {2, 3, 0.5}});
  const OptResult res = optimize(sc, start_states(sc), WarmStart::from_zeros(), setup);
  CHECK(res.final_cost == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(res.converged);
  for (const auto& row : res.controls) {
    for (const auto& u : row) {
      CHECK(std::fabs(u.pedal) < 1e-3);
      CHECK(std::fabs(u.steering) < 1e-3);
    }
  }
}

TEST_CASE("optimize: straight-ahead target strictly improves on zeros") {
  SolverSetup setup;
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {5, 0, 0}});
  const StateRow states = start_states(sc);

  const ControlSeq zeros = zero_controls(setup.horizon, 1);
  const double cost_zeros =
      target_cost(rollout(states, zeros, setup.kin), sc, setup.weights);
  const OptResult res = optimize(sc, states, WarmStart::from_zeros(), setup);
  const double cost_opt =
      target_cost(rollout(states, res.controls, setup.kin), sc, setup.weights);

  CHECK(cost_opt < cost_zeros);
  CHECK(res.final_cost < total_cost(zeros, sc, states, setup.kin, setup.weights,
                                    setup.margins));
  CHECK(controls_in_box(res.controls, setup.kin));
  // pushing toward the target means positive pedal up front
  CHECK(res.controls[0][0].pedal > 0.0);
}

TEST_CASE("optimize: head-on pair reduces the collision term below zeros init") {
  SolverSetup setup;
  Scenario sc;
  // closing at 2 m/s each from 6 m apart: inside r_mar_veh mid-horizon
  sc.vehicles.push_back({{-3, 0, 0, 2}, {3, 0, 0}});
  sc.vehicles.push_back({{3, 0, kPi, 2}, {-3, 0, kPi}});
  const StateRow states = start_states(sc);

  const ControlSeq zeros = zero_controls(setup.horizon, 2);
  const double col_zeros = vehicle_collision_cost(
      rollout(states, zeros, setup.kin), setup.margins, setup.weights);
  REQUIRE(col_zeros > 0.0);  // the scenario really is conflicting

  const OptResult res = optimize(sc, states, WarmStart::from_zeros(), setup);
  const double col_opt = vehicle_collision_cost(
      rollout(states, res.controls, setup.kin), setup.margins, setup.weights);
  CHECK(col_opt < col_zeros);
}

TEST_CASE("optimize: monotone descent and box feasibility on random instances") {
  SolverSetup setup;
  int tested = 0;
  for (std::uint64_t seed = 0; tested < 10; ++seed) {
    REQUIRE(seed < 200);
    RandomInstance inst;
    if (!make_clean_instance(seed, 2, 1, setup.horizon, setup.kin,
                             setup.margins, inst, 0.0)) {
      continue;
    }
    ++tested;
    const double init_cost =
        total_cost(zero_controls(setup.horizon, 2), inst.scenario, inst.states,
                   setup.kin, setup.weights, setup.margins);
    const OptResult res =
        optimize(inst.scenario, inst.states, WarmStart::from_zeros(), setup);
    CHECK(res.final_cost <= init_cost);
    CHECK(controls_in_box(res.controls, setup.kin));
  }
}

TEST_CASE("optimize: fixed init is deterministic apart from wall time") {
  SolverSetup setup;
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0.2, 0.5}, {4, 2, 0}});
  sc.vehicles.push_back({{5, 5, -1.0, 0}, {-2, 3, 1.0}});
  const StateRow states = start_states(sc);
  const OptResult a = optimize(sc, states, WarmStart::from_zeros(), setup);
  const OptResult b = optimize(sc, states, WarmStart::from_zeros(), setup);
  CHECK(a.final_cost == b.final_cost);
  CHECK(a.iterations == b.iterations);
  CHECK(a.converged == b.converged);
  for (std::size_t t = 0; t < a.controls.size(); ++t) {
    for (std::size_t i = 0; i < a.controls[t].size(); ++i) {
      CHECK(a.controls[t][i].pedal == b.controls[t][i].pedal);
      CHECK(a.controls[t][i].steering == b.controls[t][i].steering);
    }
  }
}

TEST_CASE("optimize: out-of-box warm start is projected before use") {
  SolverSetup setup;
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {5, 0, 0}});
  ControlSeq wild = zero_controls(setup.horizon, 1);
  for (auto& row : wild) row[0] = {10.0, -3.0};
  const OptResult res =
      optimize(sc, start_states(sc), WarmStart::from_policy(wild), setup);
  CHECK(controls_in_box(res.controls, setup.kin));
}

TEST_CASE("optimize: non-finite initial cost is an error") {
  SolverSetup setup;
  Scenario sc;
  sc.vehicles.push_back({{std::numeric_limits<double>::quiet_NaN(), 0, 0, 0},
                         {5, 0, 0}});
  CHECK_THROWS_AS(
      optimize(sc, start_states(sc), WarmStart::from_zeros(), setup),
      std::runtime_error);
}

TEST_CASE("optimize: warm start horizon mismatch is rejected") {
  SolverSetup setup;
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {5, 0, 0}});
  CHECK_THROWS_AS(optimize(sc, start_states(sc),
                           WarmStart::from_policy(zero_controls(3, 1)), setup),
                  std::invalid_argument);
}

TEST_CASE("benchmark_step: identical inits produce identical iteration counts") {
  SolverSetup setup;
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {5, 3, 0.5}});
  sc.vehicles.push_back({{6, -2, 2.0, 0}, {-4, 1, -1.0}});
  const BenchmarkResult bench = benchmark_step(
      sc, start_states(sc), WarmStart::from_zeros(), WarmStart::from_zeros(),
      setup, 3);
  CHECK(bench.mean_iterations_a == bench.mean_iterations_b);
  CHECK(bench.time_ratio > 0.0);
}

TEST_CASE("benchmark_step: a near-optimal init solves in fewer iterations") {
  SolverSetup setup;
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {5, 1, 0.2}});
  const StateRow states = start_states(sc);
  const OptResult solved = optimize(sc, states, WarmStart::from_zeros(), setup);
  const BenchmarkResult bench =
      benchmark_step(sc, states, WarmStart::from_policy(solved.controls),
                     WarmStart::from_zeros(), setup, 2);
  CHECK(bench.mean_iterations_a <= bench.mean_iterations_b);
}

TEST_CASE("optimize: clamped singularity at termination clears converged") {
  SolverSetup setup;
  Scenario sc;
  // coincident starts and targets: the distance clamp fires at every point
  sc.vehicles.push_back({{0, 0, 0, 0}, {0, 0, 0}});
  sc.vehicles.push_back({{0, 0, 0, 0}, {0, 0, 0}});
  const OptResult res =
      optimize(sc, start_states(sc), WarmStart::from_zeros(), setup);
  CHECK(res.clamp_flag);
  CHECK(!res.converged);
}
