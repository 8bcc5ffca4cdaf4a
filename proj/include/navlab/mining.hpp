#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "navlab/parallel.hpp"
#include "navlab/simulation.hpp"

namespace navlab {

struct ScoredScenario {
  int id = 0;  // index into the evaluated pool
  Scenario scenario;
  double difficulty = 0.0;  // collision events per meter traveled
  TrajectoryLog log;
};

// Events per meter. A trajectory that moved nowhere but still collided is
// ranked hardest of all.
inline double difficulty_score(const TrajectoryLog& log) {
  if (log.distance_traveled <= 0.0) {
    return log.events.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(log.events.size()) / log.distance_traveled;
}

// Evaluate every scenario under the policy and rank by difficulty,
// hardest first; ties keep pool order.
inline std::vector<ScoredScenario> mine(const ControllerFactory& policy,
                                        const std::vector<Scenario>& pool,
                                        const SimConfig& cfg,
                                        const KinematicParams& kin,
                                        int jobs = 1) {
  std::vector<ScoredScenario> scored(pool.size());
  parallel_for(pool.size(), jobs, [&](std::size_t i) {
    Controller controller = policy();
    ScoredScenario& s = scored[i];
    s.id = static_cast<int>(i);
    s.scenario = pool[i];
    s.log = run_closed_loop(controller, pool[i], cfg, kin);
    s.difficulty = difficulty_score(s.log);
  });
  std::sort(scored.begin(), scored.end(),
            [](const ScoredScenario& a, const ScoredScenario& b) {
              if (a.difficulty != b.difficulty) return a.difficulty > b.difficulty;
              return a.id < b.id;
            });
  return scored;
}

// Top ceil(fraction * n) scenarios of an existing ranking. Selections nest:
// select(0.1) is a prefix of select(0.2) and so on.
inline std::vector<ScoredScenario> select_fraction(
    const std::vector<ScoredScenario>& ranked, double fraction) {
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(ranked.size())));
  return {ranked.begin(),
          ranked.begin() + std::min(k, ranked.size())};
}

}  // namespace navlab
