#include <doctest.h>

#include <cmath>

#include "navlab/labeling.hpp"

using namespace navlab;

namespace {

LabelingConfig quick_config(int steps) {
  LabelingConfig cfg;
  cfg.sim.max_steps = steps;
  return cfg;
}

}  // namespace

TEST_CASE("label_trajectory: easy single vehicle reaches the goal cleanly") {
  LabelingConfig cfg = quick_config(120);
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {6, 2, 0.3}});
  const LabeledTrajectory traj = label_trajectory(sc, WarmSource::shifted, nullptr, cfg);
  CHECK(traj.samples.size() == 120);
  CHECK(traj.telemetry.size() == 120);
  CHECK(traj.log.events.empty());
  CHECK(traj.log.reached[0] == 1);
  CHECK(!traj.tainted);
}

TEST_CASE("label_trajectory: labels replay to the logged states exactly") {
  LabelingConfig cfg = quick_config(25);
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {5, -2, 0}});
  sc.vehicles.push_back({{8, 3, 2.5, 0}, {-2, 4, 1}});
  const LabeledTrajectory traj = label_trajectory(sc, WarmSource::shifted, nullptr, cfg);
  const StateSeq replay = rollout(start_states(sc), traj.log.controls, cfg.solver.kin);
  REQUIRE(replay.size() == traj.log.states.size());
  for (std::size_t t = 0; t < replay.size(); ++t) {
    for (std::size_t i = 0; i < replay[t].size(); ++i) {
      CHECK(replay[t][i].x == traj.log.states[t][i].x);
      CHECK(replay[t][i].y == traj.log.states[t][i].y);
      CHECK(replay[t][i].theta == traj.log.states[t][i].theta);
      CHECK(replay[t][i].v == traj.log.states[t][i].v);
    }
  }
  // label rows are what was executed
  for (std::size_t t = 0; t < traj.samples.size(); ++t) {
    for (std::size_t i = 0; i < traj.samples[t].labels.size(); ++i) {
      CHECK(traj.samples[t].labels[i].pedal == traj.log.controls[t][i].pedal);
      CHECK(traj.samples[t].labels[i].steering == traj.log.controls[t][i].steering);
    }
  }
}

TEST_CASE("label_trajectory: every label is box feasible") {
  LabelingConfig cfg = quick_config(30);
  Scenario sc;
  sc.vehicles.push_back({{-3, 0, 0, 0}, {3, 0, 0}});
  sc.vehicles.push_back({{3, 0.5, kPi, 0}, {-3, 0.5, kPi}});
  const LabeledTrajectory traj = label_trajectory(sc, WarmSource::shifted, nullptr, cfg);
  for (const LabeledSample& s : traj.samples) {
    for (const Control& u : s.labels) {
      CHECK(std::fabs(u.pedal) <= cfg.solver.kin.pedal_max);
      CHECK(std::fabs(u.steering) <= cfg.solver.kin.phi_max);
    }
  }
}

TEST_CASE("label_trajectory: policy warm source requires a model") {
  LabelingConfig cfg = quick_config(5);
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {5, 0, 0}});
  CHECK_THROWS_AS(label_trajectory(sc, WarmSource::policy, nullptr, cfg),
                  std::invalid_argument);
}

TEST_CASE("label_trajectory: policy warm source works with a fresh model") {
  LabelingConfig cfg = quick_config(10);
  GnnModel model(GnnConfig{.layers = 2, .hidden = 8}, 5);
  Scenario sc;
  sc.vehicles.push_back({{0, 0, 0, 0}, {5, 1, 0}});
  const LabeledTrajectory traj = label_trajectory(sc, WarmSource::policy, &model, cfg);
  CHECK(traj.samples.size() == 10);
}

TEST_CASE("build_dataset: empty scenario list yields an empty, valid dataset") {
  LabelingConfig cfg = quick_config(10);
  const Dataset ds = build_dataset({}, WarmSource::shifted, nullptr, cfg);
  CHECK(ds.samples.empty());
  CHECK(ds.trajectories == 0);
  CHECK(ds.tainted_trajectories == 0);
}

TEST_CASE("build_dataset: sample count is trajectories times steps") {
  LabelingConfig cfg = quick_config(15);
  std::vector<Scenario> scenarios;
  for (int k = 0; k < 3; ++k) {
    Scenario sc;
    sc.vehicles.push_back({{0, double(k), 0, 0}, {6, double(k), 0}});
    scenarios.push_back(sc);
  }
  std::vector<TrajectoryTelemetry> telemetry;
  const Dataset ds =
      build_dataset(scenarios, WarmSource::shifted, nullptr, cfg, 2, &telemetry);
  CHECK(ds.trajectories == 3);
  CHECK(ds.samples.size() == 45);
  REQUIRE(telemetry.size() == 3);
  CHECK(telemetry[1].scenario_id == 1);
  CHECK(telemetry[1].steps.size() == 15);
}

TEST_CASE("build_dataset: deterministic across runs and worker counts") {
  LabelingConfig cfg = quick_config(12);
  std::vector<Scenario> scenarios;
  for (int k = 0; k < 2; ++k) {
    Scenario sc;
    sc.vehicles.push_back({{0, 0, 0, 0}, {5, double(k) - 1, 0}});
    sc.vehicles.push_back({{7, 2, 2.0, 0}, {-1, 3, 0.7}});
    scenarios.push_back(sc);
  }
  const Dataset a = build_dataset(scenarios, WarmSource::shifted, nullptr, cfg, 1);
  const Dataset b = build_dataset(scenarios, WarmSource::shifted, nullptr, cfg, 2);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t s = 0; s < a.samples.size(); ++s) {
    for (std::size_t i = 0; i < a.samples[s].labels.size(); ++i) {
      CHECK(a.samples[s].labels[i].pedal == b.samples[s].labels[i].pedal);
      CHECK(a.samples[s].labels[i].steering == b.samples[s].labels[i].steering);
    }
  }
}

TEST_CASE("label_trajectory: singularity-riddled scenario is tainted and excluded") {
  LabelingConfig cfg = quick_config(12);
  Scenario degenerate;
  degenerate.vehicles.push_back({{0, 0, 0, 0}, {0, 0, 0}});
  degenerate.vehicles.push_back({{0, 0, 0, 0}, {0, 0, 0}});
  const LabeledTrajectory traj =
      label_trajectory(degenerate, WarmSource::shifted, nullptr, cfg);
  CHECK(traj.tainted);

  Scenario easy;
  easy.vehicles.push_back({{0, 0, 0, 0}, {6, 0, 0}});
  const Dataset ds = build_dataset({degenerate, easy}, WarmSource::shifted,
                                   nullptr, cfg);
  CHECK(ds.trajectories == 2);
  CHECK(ds.tainted_trajectories == 1);
  CHECK(ds.samples.size() == 12);  // only the clean trajectory contributes
}
