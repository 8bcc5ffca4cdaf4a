#pragma once

#include <memory>

#include "navlab/gnn.hpp"
#include "navlab/optimizer.hpp"
#include "navlab/simulation.hpp"

namespace navlab {

// One forward pass per step; stateless between steps.
inline Controller make_policy_controller(const GnnModel& model) {
  return [&model](const Scenario& sc, const StateRow& states) {
    return gnn_forward(model, build_graph(make_snapshot(sc, states)));
  };
}

inline ControllerFactory make_policy_controller_factory(const GnnModel& model) {
  return [&model]() { return make_policy_controller(model); };
}

enum class WarmSource { shifted, policy };

// Receding-horizon controller: re-optimizes every step and applies the first
// control row. Warm start comes from the shifted previous solution or from a
// policy plan; a cold restart is solved alongside and the cheaper solution
// wins, which escapes stale warm-start basins near the goal.
inline Controller make_mpc_controller(const SolverSetup& setup,
                                      WarmSource warm,
                                      const GnnModel* model = nullptr) {
  if (warm == WarmSource::policy && model == nullptr) {
    throw std::invalid_argument("make_mpc_controller: policy warm start needs a model");
  }
  auto previous = std::make_shared<ControlSeq>();
  return [setup, warm, model, previous](const Scenario& sc,
                                        const StateRow& states) {
    WarmStart init;
    if (warm == WarmSource::policy) {
      init = WarmStart::from_policy(
          predict_plan(*model, sc, states, setup.horizon, setup.kin));
    } else if (previous->empty()) {
      init = WarmStart::from_zeros();
    } else {
      init = WarmStart::from_previous(*previous);
    }
    OptResult res = optimize(sc, states, init, setup);
    if (init.kind != WarmStartKind::zeros) {
      const OptResult alt = optimize(sc, states, WarmStart::from_zeros(), setup);
      if (alt.final_cost < res.final_cost) res = alt;
    }
    *previous = res.controls;
    return res.controls.front();
  };
}

inline ControllerFactory make_mpc_controller_factory(const SolverSetup& setup,
                                                     WarmSource warm,
                                                     const GnnModel* model = nullptr) {
  return [setup, warm, model]() { return make_mpc_controller(setup, warm, model); };
}

}  // namespace navlab
