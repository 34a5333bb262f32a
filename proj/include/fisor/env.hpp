#ifndef FISOR_ENV_HPP
#define FISOR_ENV_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fisor/rng.hpp"

#include "json.hpp"

namespace fisor {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline double dist(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

// 2D reach-avoid task: drive to the goal disk while staying clear of two
// hazard disks. Constraint violation h(s) = hazard_radius - min distance to
// the hazard centers; h > 0 means the agent is inside a hazard.
struct EnvConfig {
  double arena_half_width = 3.0;
  std::array<Vec2, 2> hazard_centers{Vec2{-1.0, 0.8}, Vec2{1.0, -0.8}};
  double hazard_radius = 0.5;
  Vec2 goal_center{2.2, 2.2};
  double goal_radius = 0.3;
  double dt = 0.1;
  double v_min = 0.0;
  double v_max = 2.0;
  double accel_bound = 1.0;
  double turn_bound = M_PI;
  int max_steps = 200;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

void to_json(nlohmann::json& j, const EnvConfig& cfg);
void from_json(const nlohmann::json& j, EnvConfig& cfg);

// FNV-1a over the canonical JSON dump; identifies which config produced a
// dataset.
std::uint64_t config_hash(const EnvConfig& cfg);

struct EnvState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double theta = 0.0;  // wrapped to (-pi, pi]
  int t = 0;
};

struct Action {
  double accel = 0.0;
  double turn = 0.0;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  double cost = 0.0;
  double h = 0.0;
  bool done = false;          // goal reached or step budget exhausted
  bool reached_goal = false;  // true terminal for value bootstrapping
};

double wrap_angle(double theta);

// h(s) evaluated at a position.
double violation(double x, double y, const EnvConfig& cfg);
double goal_distance(double x, double y, const EnvConfig& cfg);

// Kinematic update; clips the action to bounds, clamps position to the
// arena, wraps the heading. Throws InputError on non-finite inputs.
StepResult step(const EnvState& state, const Action& action, const EnvConfig& cfg);

// Scripted safest policy: maximum deceleration plus maximum turn away from
// the nearest hazard (ties resolved toward hazard 0).
Action safest_action(const EnvState& state, const EnvConfig& cfg);

// Trajectory of the safest policy, start state included. Stops early once
// the agent is provably parked in a safe spot or a violation occurs.
std::vector<EnvState> oracle_rollout(const EnvState& state, const EnvConfig& cfg);

// Ground truth feasibility: true iff the safest-policy rollout never
// violates the constraint.
bool oracle_feasible(const EnvState& state, const EnvConfig& cfg);

// Goal-seeking proportional controller with hazard repulsion; the noise
// terms are zero-mean and drawn from the caller's stream.
Action scripted_behavior(const EnvState& state, const EnvConfig& cfg, RngStream& rng,
                         double noise_accel = 0.3, double noise_turn = 0.8);

// Uniform start state over the arena, rejecting starts inside the goal
// region. Speed and heading are uniform over their ranges.
EnvState sample_start(const EnvConfig& cfg, RngStream& rng);

// Network observation: (x, y, v, cos theta, sin theta).
inline constexpr int kObsDim = 5;
inline constexpr int kActDim = 2;

void observe(const EnvState& state, double* out5);
std::vector<double> observe(const EnvState& state);

}  // namespace fisor

#endif
