#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "fisor/env.hpp"
#include "fisor/errors.hpp"

using namespace fisor;

namespace {

EnvConfig default_cfg() {
  EnvConfig cfg;
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_CASE("config invariants are enforced") {
  EnvConfig cfg = default_cfg();
  cfg.hazard_radius = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_cfg();
  cfg.goal_center = cfg.hazard_centers[0];
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg = default_cfg();
  cfg.v_min = cfg.v_max;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config json round trip and hash stability") {
  EnvConfig cfg = default_cfg();
  nlohmann::json j = cfg;
  EnvConfig back = j.get<EnvConfig>();
  CHECK(config_hash(back) == config_hash(cfg));

  back.hazard_radius = 0.6;
  CHECK(config_hash(back) != config_hash(cfg));
}

TEST_CASE("reward is the goal-distance decrement") {
  EnvConfig cfg = default_cfg();
  // Start 1.0 away from the goal, drive straight at it at constant speed.
  EnvState s;
  s.x = cfg.goal_center.x - 1.0;
  s.y = cfg.goal_center.y;
  s.theta = 0.0;  // pointing at the goal
  s.v = 1.0;
  const StepResult r = step(s, Action{0.0, 0.0}, cfg);
  // v stays 1.0, so the agent moves 0.1 closer.
  CHECK(r.reward == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("h at the hazard boundary and inside") {
  EnvConfig cfg = default_cfg();
  const Vec2 hz = cfg.hazard_centers[0];

  // Exactly on the boundary: min distance == hazard_radius -> h = 0.
  CHECK(violation(hz.x + cfg.hazard_radius, hz.y, cfg) == doctest::Approx(0.0));

  // Min hazard distance 0.3 with radius 0.5 -> h = 0.2, cost = 0.2.
  EnvState s;
  s.x = hz.x + 0.3;
  s.y = hz.y;
  s.v = 0.0;
  s.theta = M_PI / 2.0;  // step keeps the position essentially fixed
  const StepResult r = step(s, Action{0.0, 0.0}, cfg);
  CHECK(r.h == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(r.cost == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("cost equals max(h, 0) over random transitions") {
  EnvConfig cfg = default_cfg();
  RngStream rng(3);
  EnvState s = sample_start(cfg, rng);
  for (int i = 0; i < 2000; ++i) {
    const Action a{rng.uniform(-2, 2), rng.uniform(-4, 4)};
    const StepResult r = step(s, a, cfg);
    CHECK(r.cost == std::max(r.h, 0.0));
    CHECK(r.h == doctest::Approx(violation(r.next.x, r.next.y, cfg)));
    s = r.done ? sample_start(cfg, rng) : r.next;
  }
}

TEST_CASE("step is deterministic and respects invariants") {
  EnvConfig cfg = default_cfg();
  RngStream rng(11);
  for (int i = 0; i < 500; ++i) {
    const EnvState s = sample_start(cfg, rng);
    const Action a{rng.uniform(-1.5, 1.5), rng.uniform(-5, 5)};
    const StepResult r1 = step(s, a, cfg);
    const StepResult r2 = step(s, a, cfg);
    CHECK(r1.next.x == r2.next.x);
    CHECK(r1.next.y == r2.next.y);
    CHECK(r1.next.v == r2.next.v);
    CHECK(r1.next.theta == r2.next.theta);
    CHECK(r1.reward == r2.reward);

    CHECK(r1.next.v >= cfg.v_min);
    CHECK(r1.next.v <= cfg.v_max);
    CHECK(std::fabs(r1.next.x) <= cfg.arena_half_width);
    CHECK(std::fabs(r1.next.y) <= cfg.arena_half_width);
    CHECK(r1.next.theta > -M_PI);
    CHECK(r1.next.theta <= M_PI);
  }
}

TEST_CASE("non-finite inputs are rejected") {
  EnvConfig cfg = default_cfg();
  EnvState s;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EnvState bad = s;
  bad.x = nan;
  CHECK_THROWS_AS(step(bad, Action{}, cfg), InputError);
  CHECK_THROWS_AS(step(s, Action{nan, 0.0}, cfg), InputError);
  CHECK_THROWS_AS(step(s, Action{0.0, std::numeric_limits<double>::infinity()}, cfg),
                  InputError);
}

TEST_CASE("episode termination: goal and step budget") {
  EnvConfig cfg = default_cfg();
  EnvState s;
  s.x = cfg.goal_center.x - 0.32;
  s.y = cfg.goal_center.y;
  s.theta = 0.0;
  s.v = 1.0;
  const StepResult r = step(s, Action{0.0, 0.0}, cfg);
  CHECK(r.reached_goal);
  CHECK(r.done);

  EnvState late;
  late.x = -2.0;
  late.y = -2.0;
  late.t = cfg.max_steps - 1;
  const StepResult r2 = step(late, Action{0.0, 0.0}, cfg);
  CHECK(r2.done);
  CHECK_FALSE(r2.reached_goal);
}

TEST_CASE("oracle: state inside a hazard is infeasible") {
  EnvConfig cfg = default_cfg();
  EnvState s;
  s.x = cfg.hazard_centers[0].x;
  s.y = cfg.hazard_centers[0].y;
  CHECK_FALSE(oracle_feasible(s, cfg));
}

TEST_CASE("oracle: stationary safe state is feasible") {
  EnvConfig cfg = default_cfg();
  EnvState s;
  s.x = 0.0;
  s.y = 0.0;
  s.v = 0.0;
  CHECK(violation(s.x, s.y, cfg) < 0.0);
  CHECK(oracle_feasible(s, cfg));
}

TEST_CASE("oracle: feasibility boundary when heading straight at a hazard") {
  EnvConfig cfg = default_cfg();
  const Vec2 hz = cfg.hazard_centers[1];
  // Approach from the east at full speed, pointing at the hazard center.
  bool seen_infeasible = false;
  bool seen_feasible = false;
  double last_label_change = -1.0;
  int changes = 0;
  bool prev = false;
  bool have_prev = false;
  for (double gap = 0.05; gap <= 2.0 + 1e-9; gap += 0.05) {
    EnvState s;
    s.x = hz.x + cfg.hazard_radius + gap;
    s.y = hz.y;
    s.v = cfg.v_max;
    s.theta = M_PI;  // straight at the hazard
    const bool feasible = oracle_feasible(s, cfg);
    seen_infeasible |= !feasible;
    seen_feasible |= feasible;
    if (have_prev && feasible != prev) {
      ++changes;
      last_label_change = gap;
    }
    prev = feasible;
    have_prev = true;
  }
  // Both labels occur and the boundary is a single crossing from
  // infeasible (close) to feasible (far).
  CHECK(seen_infeasible);
  CHECK(seen_feasible);
  CHECK(changes == 1);
  CHECK(last_label_change > 0.05);
}

TEST_CASE("oracle labels are consistent with the replayed trajectory") {
  EnvConfig cfg = default_cfg();
  RngStream rng(17);
  for (int i = 0; i < 300; ++i) {
    const EnvState s = sample_start(cfg, rng);
    const bool feasible = oracle_feasible(s, cfg);
    const auto traj = oracle_rollout(s, cfg);
    bool any_violation = false;
    for (const auto& st : traj) any_violation |= violation(st.x, st.y, cfg) > 0.0;
    CHECK(feasible == !any_violation);
  }
}

TEST_CASE("oracle is monotone in hazard radius") {
  EnvConfig small = default_cfg();
  EnvConfig big = default_cfg();
  big.hazard_radius = 0.7;
  RngStream rng(23);
  for (int i = 0; i < 300; ++i) {
    const EnvState s = sample_start(small, rng);
    if (!oracle_feasible(s, small)) CHECK_FALSE(oracle_feasible(s, big));
  }
}

TEST_CASE("scripted behavior: aligned with goal and clear of hazards") {
  EnvConfig cfg = default_cfg();
  EnvState s;
  s.x = 0.2;
  s.y = 0.2;
  s.v = 0.5;
  s.theta = std::atan2(cfg.goal_center.y - s.y, cfg.goal_center.x - s.x);
  REQUIRE(dist(Vec2{s.x, s.y}, cfg.hazard_centers[0]) > 2.0 * cfg.hazard_radius);
  REQUIRE(dist(Vec2{s.x, s.y}, cfg.hazard_centers[1]) > 2.0 * cfg.hazard_radius);
  RngStream rng(1);
  const Action a = scripted_behavior(s, cfg, rng, 0.0, 0.0);
  CHECK(std::fabs(a.turn) < 1e-9);
  CHECK(a.accel > 0.0);
}

TEST_CASE("scripted behavior: steers away from a blocking hazard") {
  EnvConfig cfg = default_cfg();
  cfg.hazard_centers[0] = Vec2{0.7, 0.01};  // slightly left of the goal line
  cfg.goal_center = Vec2{2.2, 0.0};
  cfg.validate();
  EnvState s;
  s.x = 0.0;
  s.y = 0.0;
  s.v = 1.0;
  s.theta = 0.0;
  RngStream rng(1);
  const Action a = scripted_behavior(s, cfg, rng, 0.0, 0.0);
  // Hazard sits left of the agent-goal line; steering away means turning
  // right, matching the sign of cross(to_hazard, to_goal).
  const double cr = 0.7 * 0.0 - 0.01 * 2.2;
  CHECK(cr < 0.0);
  CHECK(a.turn < 0.0);
}

TEST_CASE("scripted behavior is deterministic for a fixed stream") {
  EnvConfig cfg = default_cfg();
  EnvState s;
  s.x = -1.5;
  s.y = 0.4;
  s.v = 1.0;
  s.theta = 0.3;
  RngStream r1(99), r2(99);
  const Action a = scripted_behavior(s, cfg, r1);
  const Action b = scripted_behavior(s, cfg, r2);
  CHECK(a.accel == b.accel);
  CHECK(a.turn == b.turn);
}

TEST_CASE("safest action decelerates and turns at full rate") {
  EnvConfig cfg = default_cfg();
  RngStream rng(31);
  for (int i = 0; i < 100; ++i) {
    const EnvState s = sample_start(cfg, rng);
    const Action a = safest_action(s, cfg);
    CHECK(a.accel == -cfg.accel_bound);
    CHECK(std::fabs(a.turn) == cfg.turn_bound);
  }
}
