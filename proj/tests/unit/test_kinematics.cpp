#include <doctest.h>

#include <cmath>

#include "navlab/kinematics.hpp"
#include "navlab/rng.hpp"

using namespace navlab;

TEST_CASE("wrap_angle maps into (-pi, pi] and is idempotent") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == kPi);
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
  CHECK(wrap_angle(-3.0 * kPi / 2.0) == doctest::Approx(kPi / 2.0));
  CHECK(wrap_angle(2.0 * kPi) == doctest::Approx(0.0));
  // in-range angles pass through bit-exactly
  for (double a : {0.5, -0.5, 3.0, -3.0, 1e-9}) {
    CHECK(wrap_angle(a) == a);
  }
  Rng rng(7);
  for (int k = 0; k < 1000; ++k) {
    const double w = wrap_angle(rng.uniform(-50.0, 50.0));
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(wrap_angle(w) == w);
  }
}

TEST_CASE("step: zero velocity, zero input is a fixed point") {
  KinematicParams p;
  const VehicleState s0{0, 0, 0, 0};
  const VehicleState s1 = step(s0, Control{0, 0}, p);
  CHECK(s1.x == 0.0);
  CHECK(s1.y == 0.0);
  CHECK(s1.theta == 0.0);
  CHECK(s1.v == 0.0);
}

TEST_CASE("step: hand evaluations of the bicycle update") {
  KinematicParams p;
  p.dt = 0.1;
  p.beta_decay = 1.0;
  p.gamma_steer = 1.0;
  SUBCASE("straight coasting") {
    const VehicleState s = step({0, 0, 0, 2}, Control{0, 0}, p);
    CHECK(s.x == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(s.y == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.theta == 0.0);
    CHECK(s.v == 2.0);
  }
  SUBCASE("accelerating turn, tan(pi/4) = 1") {
    p.beta_decay = 0.9;
    p.gamma_steer = 0.5;
    const VehicleState s = step({1, 1, kPi / 2, 1}, Control{1, kPi / 4}, p);
    CHECK(s.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.y == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(s.theta == doctest::Approx(kPi / 2 + 0.05).epsilon(1e-12));
    CHECK(s.v == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rollout: H=1 reduces to one step per vehicle") {
  KinematicParams p;
  StateRow init{{0, 0, 0.3, 1.0}, {2, 2, -0.7, 0.5}};
  ControlSeq controls{{{0.5, 0.1}, {-0.3, -0.2}}};
  const StateSeq seq = rollout(init, controls, p);
  REQUIRE(seq.size() == 2);
  for (std::size_t i = 0; i < init.size(); ++i) {
    const VehicleState expect = step(init[i], controls[0][i], p);
    CHECK(seq[1][i].x == expect.x);
    CHECK(seq[1][i].y == expect.y);
    CHECK(seq[1][i].theta == expect.theta);
    CHECK(seq[1][i].v == expect.v);
  }
}

TEST_CASE("rollout: stationary vehicle under zero controls stays put") {
  KinematicParams p;
  const StateSeq seq = rollout({{1, 2, 0.5, 0}}, zero_controls(10, 1), p);
  for (const StateRow& row : seq) {
    CHECK(row[0].x == 1.0);
    CHECK(row[0].y == 2.0);
    CHECK(row[0].theta == 0.5);
    CHECK(row[0].v == 0.0);
  }
}

TEST_CASE("rollout: constant pedal forward recursion") {
  KinematicParams p;
  p.dt = 0.1;
  p.beta_decay = 1.0;
  ControlSeq controls(3, ControlRow{{1.0, 0.0}});
  const StateSeq seq = rollout({{0, 0, 0, 0}}, controls, p);
  REQUIRE(seq.size() == 4);
  CHECK(seq[1][0].v == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(seq[2][0].v == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(seq[3][0].v == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(seq[1][0].x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(seq[2][0].x == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(seq[3][0].x == doctest::Approx(0.03).epsilon(1e-12));
}

TEST_CASE("rollout: dimension mismatch is rejected") {
  KinematicParams p;
  ControlSeq controls{ControlRow(2)};
  CHECK_THROWS_AS(rollout(StateRow(3), controls, p), std::invalid_argument);
}

TEST_CASE("property: determinism, bit-identical repeat") {
  KinematicParams p;
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    StateRow init{{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3),
                   rng.uniform(-2, 2)}};
    ControlSeq controls(8, ControlRow(1));
    for (auto& row : controls) {
      row[0] = {rng.uniform(-1, 1), rng.uniform(-0.7, 0.7)};
    }
    const StateSeq a = rollout(init, controls, p);
    const StateSeq b = rollout(init, controls, p);
    for (std::size_t t = 0; t < a.size(); ++t) {
      CHECK(a[t][0].x == b[t][0].x);
      CHECK(a[t][0].y == b[t][0].y);
      CHECK(a[t][0].theta == b[t][0].theta);
      CHECK(a[t][0].v == b[t][0].v);
    }
  }
}

TEST_CASE("property: zero steering keeps heading and motion collinear") {
  KinematicParams p;
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const VehicleState init{rng.uniform(-5, 5), rng.uniform(-5, 5),
                            rng.uniform(-3.1, 3.1), rng.uniform(-2, 2)};
    ControlSeq controls(12, ControlRow(1));
    for (auto& row : controls) row[0] = {rng.uniform(-1, 1), 0.0};
    const StateSeq seq = rollout({init}, controls, p);
    const double hx = std::cos(init.theta);
    const double hy = std::sin(init.theta);
    for (const StateRow& row : seq) {
      CHECK(row[0].theta == init.theta);
      const double dx = row[0].x - init.x;
      const double dy = row[0].y - init.y;
      CHECK(std::fabs(dx * hy - dy * hx) < 1e-9);
    }
  }
}

TEST_CASE("property: coasting speed is exactly beta^t * v0") {
  KinematicParams p;
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const double v0 = rng.uniform(-3, 3);
    const StateSeq seq =
        rollout({{0, 0, 0.2, v0}}, zero_controls(15, 1), p);
    double expect = v0;
    for (std::size_t t = 1; t < seq.size(); ++t) {
      expect *= p.beta_decay;
      CHECK(seq[t][0].v == expect);
    }
  }
}

TEST_CASE("property: rollout rows equal successive step applications") {
  KinematicParams p;
  Rng rng(99);
  StateRow init;
  for (int i = 0; i < 3; ++i) {
    init.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-3, 3),
                    rng.uniform(-2, 2)});
  }
  ControlSeq controls(10, ControlRow(3));
  for (auto& row : controls) {
    for (auto& u : row) u = {rng.uniform(-1, 1), rng.uniform(-0.7, 0.7)};
  }
  const StateSeq seq = rollout(init, controls, p);
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
    for (std::size_t i = 0; i < init.size(); ++i) {
      const VehicleState expect = step(seq[t][i], controls[t][i], p);
      CHECK(seq[t + 1][i].x == expect.x);
      CHECK(seq[t + 1][i].y == expect.y);
      CHECK(seq[t + 1][i].theta == expect.theta);
      CHECK(seq[t + 1][i].v == expect.v);
    }
  }
}

TEST_CASE("clamp_control saturates at the box") {
  KinematicParams p;
  const Control c = clamp_control({5.0, -3.0}, p);
  CHECK(c.pedal == p.pedal_max);
  CHECK(c.steering == -p.phi_max);
}
