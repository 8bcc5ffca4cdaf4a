#include <doctest.h>

#include <cmath>
#include <limits>

#include "navlab/mining.hpp"

using namespace navlab;

namespace {

ControllerFactory drive_straight() {
  return []() {
    return [](const Scenario&, const StateRow& states) {
      return ControlRow(states.size(), Control{1.0, 0.0});
    };
  };
}

// n vehicles clustered so that every pair starts in contact, all heading +x
Scenario cluster_scenario(int n, double spacing) {
  Scenario sc;
  for (int i = 0; i < n; ++i) {
    sc.vehicles.push_back({{0.0, i * spacing, 0.0, 0.0}, {40.0, i * spacing, 0.0}});
  }
  return sc;
}

}  // namespace

TEST_CASE("difficulty_score: no events is zero for any distance") {
  TrajectoryLog log;
  log.distance_traveled = 123.0;
  CHECK(difficulty_score(log) == 0.0);
}

TEST_CASE("difficulty_score: direct ratio") {
  TrajectoryLog log;
  log.events.resize(3);
  log.distance_traveled = 60.0;
  CHECK(difficulty_score(log) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("difficulty_score: shorter distance ranks harder at equal events") {
  TrajectoryLog far, near;
  far.events.resize(1);
  far.distance_traveled = 200.0;
  near.events.resize(1);
  near.distance_traveled = 50.0;
  CHECK(difficulty_score(near) > difficulty_score(far));
}

TEST_CASE("difficulty_score: zero-distance sentinels") {
  TrajectoryLog still;
  still.distance_traveled = 0.0;
  CHECK(difficulty_score(still) == 0.0);
  still.events.resize(2);
  CHECK(difficulty_score(still) == std::numeric_limits<double>::infinity());
}

TEST_CASE("mine: collision-free pool keeps the original order") {
  SimConfig cfg;
  cfg.max_steps = 20;
  KinematicParams kin;
  std::vector<Scenario> pool;
  for (int k = 0; k < 5; ++k) pool.push_back(cluster_scenario(1, 0.0));
  const auto ranked = mine(drive_straight(), pool, cfg, kin);
  REQUIRE(ranked.size() == 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(ranked[k].id == k);
    CHECK(ranked[k].difficulty == 0.0);
  }
}

TEST_CASE("mine: constructed pool ranks by known event/distance ratios") {
  SimConfig cfg;
  cfg.max_steps = 20;
  KinematicParams kin;
  std::vector<Scenario> pool;
  pool.push_back(cluster_scenario(2, 10.0));  // id 0: no contact
  pool.push_back(cluster_scenario(2, 1.0));   // id 1: one pair event
  pool.push_back(cluster_scenario(3, 1.0));   // id 2: two adjacent-pair events
  const auto ranked = mine(drive_straight(), pool, cfg, kin);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].id == 2);
  CHECK(ranked[1].id == 1);
  CHECK(ranked[2].id == 0);
  CHECK(ranked[0].log.events.size() == 2);
  CHECK(ranked[1].log.events.size() == 1);
  CHECK(ranked[2].difficulty == 0.0);
  // per-vehicle path lengths are equal, so the 3-vehicle cluster is strictly harder
  CHECK(ranked[0].difficulty > ranked[1].difficulty);
}

TEST_CASE("mine: repeated runs produce the identical ranking") {
  SimConfig cfg;
  cfg.max_steps = 15;
  KinematicParams kin;
  std::vector<Scenario> pool;
  for (int k = 0; k < 6; ++k) pool.push_back(cluster_scenario(1 + k % 3, 1.5));
  const auto a = mine(drive_straight(), pool, cfg, kin);
  const auto b = mine(drive_straight(), pool, cfg, kin, 2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].difficulty == b[i].difficulty);
  }
}

TEST_CASE("mine: score is invariant to vehicle relabeling") {
  SimConfig cfg;
  cfg.max_steps = 20;
  KinematicParams kin;
  Scenario sc = cluster_scenario(3, 1.0);
  Scenario relabeled = sc;
  std::swap(relabeled.vehicles[0], relabeled.vehicles[2]);
  const auto a = mine(drive_straight(), {sc}, cfg, kin);
  const auto b = mine(drive_straight(), {relabeled}, cfg, kin);
  CHECK(a[0].difficulty == doctest::Approx(b[0].difficulty).epsilon(1e-15));
}

TEST_CASE("select_fraction: whole pool at fraction 1.0") {
  std::vector<ScoredScenario> ranked(10);
  for (int i = 0; i < 10; ++i) ranked[i].id = i;
  CHECK(select_fraction(ranked, 1.0).size() == 10);
}

TEST_CASE("select_fraction: ceiling rule") {
  std::vector<ScoredScenario> ranked(10);
  for (int i = 0; i < 10; ++i) ranked[i].id = i;
  const auto top = select_fraction(ranked, 0.25);
  REQUIRE(top.size() == 3);
  CHECK(top[0].id == 0);
  CHECK(top[2].id == 2);
}

TEST_CASE("select_fraction: selections nest across the fraction ladder") {
  Rng rng(12);
  std::vector<ScoredScenario> ranked(37);
  for (int i = 0; i < 37; ++i) {
    ranked[i].id = i;
    ranked[i].difficulty = rng.uniform(0, 1);
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.difficulty > b.difficulty; });
  std::vector<ScoredScenario> prev;
  for (double f = 0.1; f <= 1.0 + 1e-12; f += 0.1) {
    const auto sel = select_fraction(ranked, f);
    REQUIRE(sel.size() >= prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
      CHECK(sel[i].id == prev[i].id);
    }
    prev = sel;
  }
  CHECK(prev.size() == 37);
}
