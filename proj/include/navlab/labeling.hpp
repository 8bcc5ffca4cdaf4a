#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navlab/controllers.hpp"
#include "navlab/gnn.hpp"
#include "navlab/optimizer.hpp"
#include "navlab/parallel.hpp"
#include "navlab/simulation.hpp"

namespace navlab {

struct StepTelemetry {
  double wall_time = 0.0;  // s
  int iterations = 0;
  bool clamped = false;
};

struct LabelingConfig {
  SolverSetup solver;
  SimConfig sim;
  // trajectories whose solves hit the singularity clamp more often than this
  // fraction of steps are excluded from training
  double taint_threshold = 0.1;
};

struct LabeledTrajectory {
  std::vector<LabeledSample> samples;
  TrajectoryLog log;
  std::vector<StepTelemetry> telemetry;
  bool tainted = false;
};

// Receding-horizon labeling: optimize, record the first control row as the
// label for the current snapshot, execute it, repeat.
inline LabeledTrajectory label_trajectory(const Scenario& sc, WarmSource warm,
                                          const GnnModel* model,
                                          const LabelingConfig& cfg) {
  if (warm == WarmSource::policy && model == nullptr) {
    throw std::invalid_argument("label_trajectory: policy warm source needs a model");
  }
  LabeledTrajectory out;
  TrajectoryLog& log = out.log;
  log.states.push_back(start_states(sc));
  ControlSeq previous;
  int clamped_steps = 0;

  for (int t = 0; t < cfg.sim.max_steps; ++t) {
    WarmStart init;
    if (warm == WarmSource::policy) {
      init = WarmStart::from_policy(predict_plan(
          *model, sc, log.states.back(), cfg.solver.horizon, cfg.solver.kin));
    } else if (previous.empty()) {
      init = WarmStart::from_zeros();
    } else {
      init = WarmStart::from_previous(previous);
    }

    OptResult res;
    try {
      res = optimize(sc, log.states.back(), init, cfg.solver);
    } catch (const std::exception& e) {
      throw std::runtime_error("label_trajectory: optimizer failed at step " +
                               std::to_string(t) + ": " + e.what());
    }
    previous = res.controls;
    out.telemetry.push_back({res.wall_time, res.iterations, res.clamp_flag});
    if (res.clamp_flag) ++clamped_steps;

    LabeledSample sample;
    sample.snapshot = make_snapshot(sc, log.states.back());
    sample.labels = res.controls.front();
    out.samples.push_back(std::move(sample));

    StateRow next(sc.vehicles.size());
    for (std::size_t i = 0; i < next.size(); ++i) {
      next[i] = step(log.states.back()[i], res.controls.front()[i], cfg.solver.kin);
    }
    log.controls.push_back(res.controls.front());
    log.states.push_back(std::move(next));
  }

  log.events = detect_collisions(log.states, sc, cfg.sim);
  log.reached = reached_flags(log.states, sc, log.events, cfg.sim);
  log.distance_traveled = path_length(log.states);
  out.tainted = clamped_steps >
                cfg.taint_threshold * static_cast<double>(cfg.sim.max_steps);
  return out;
}

struct Dataset {
  std::vector<LabeledSample> samples;
  std::uint64_t seed = 0;
  std::string config_hash;
  int trajectories = 0;
  int tainted_trajectories = 0;
};

struct TrajectoryTelemetry {
  int scenario_id = 0;
  bool tainted = false;
  std::vector<StepTelemetry> steps;
};

// Label every scenario and concatenate the non-tainted trajectories.
// Telemetry is reported separately so data artifacts stay deterministic.
inline Dataset build_dataset(const std::vector<Scenario>& scenarios,
                             WarmSource warm, const GnnModel* model,
                             const LabelingConfig& cfg, int jobs = 1,
                             std::vector<TrajectoryTelemetry>* telemetry = nullptr) {
  std::vector<LabeledTrajectory> results(scenarios.size());
  parallel_for(scenarios.size(), jobs, [&](std::size_t i) {
    results[i] = label_trajectory(scenarios[i], warm, model, cfg);
  });

  Dataset ds;
  for (std::size_t i = 0; i < results.size(); ++i) {
    ++ds.trajectories;
    if (telemetry) {
      telemetry->push_back(
          {static_cast<int>(i), results[i].tainted, results[i].telemetry});
    }
    if (results[i].tainted) {
      ++ds.tainted_trajectories;
      continue;
    }
    for (LabeledSample& s : results[i].samples) {
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace navlab
