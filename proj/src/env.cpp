#include "fisor/env.hpp"

#include <algorithm>
#include <cmath>

#include "fisor/errors.hpp"

namespace fisor {

namespace {

double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void EnvConfig::validate() const {
  if (!(hazard_radius > 0.0)) throw ConfigError("env: hazard_radius must be > 0");
  if (!(goal_radius > 0.0)) throw ConfigError("env: goal_radius must be > 0");
  if (!(dt > 0.0)) throw ConfigError("env: dt must be > 0");
  if (!(v_min >= 0.0) || !(v_min < v_max)) throw ConfigError("env: need 0 <= v_min < v_max");
  if (max_steps < 1) throw ConfigError("env: max_steps must be >= 1");
  if (!(arena_half_width > 0.0)) throw ConfigError("env: arena_half_width must be > 0");
  if (!(accel_bound > 0.0) || !(turn_bound > 0.0))
    throw ConfigError("env: control bounds must be > 0");
  for (const auto& hz : hazard_centers) {
    if (dist(goal_center, hz) <= hazard_radius)
      throw ConfigError("env: goal_center must lie strictly outside the hazard disks");
  }
}

void to_json(nlohmann::json& j, const EnvConfig& cfg) {
  j = nlohmann::json{
      {"version", 1},
      {"arena_half_width", cfg.arena_half_width},
      {"hazard_centers",
       {{cfg.hazard_centers[0].x, cfg.hazard_centers[0].y},
        {cfg.hazard_centers[1].x, cfg.hazard_centers[1].y}}},
      {"hazard_radius", cfg.hazard_radius},
      {"goal_center", {cfg.goal_center.x, cfg.goal_center.y}},
      {"goal_radius", cfg.goal_radius},
      {"dt", cfg.dt},
      {"v_bounds", {cfg.v_min, cfg.v_max}},
      {"accel_bound", cfg.accel_bound},
      {"turn_bound", cfg.turn_bound},
      {"max_steps", cfg.max_steps},
      {"seed", cfg.seed},
  };
}

void from_json(const nlohmann::json& j, EnvConfig& cfg) {
  if (j.value("version", 1) != 1) throw ConfigError("env config: unsupported version");
  cfg.arena_half_width = j.at("arena_half_width").get<double>();
  const auto& hz = j.at("hazard_centers");
  cfg.hazard_centers[0] = Vec2{hz.at(0).at(0).get<double>(), hz.at(0).at(1).get<double>()};
  cfg.hazard_centers[1] = Vec2{hz.at(1).at(0).get<double>(), hz.at(1).at(1).get<double>()};
  cfg.hazard_radius = j.at("hazard_radius").get<double>();
  cfg.goal_center = Vec2{j.at("goal_center").at(0).get<double>(),
                         j.at("goal_center").at(1).get<double>()};
  cfg.goal_radius = j.at("goal_radius").get<double>();
  cfg.dt = j.at("dt").get<double>();
  cfg.v_min = j.at("v_bounds").at(0).get<double>();
  cfg.v_max = j.at("v_bounds").at(1).get<double>();
  cfg.accel_bound = j.at("accel_bound").get<double>();
  cfg.turn_bound = j.at("turn_bound").get<double>();
  cfg.max_steps = j.at("max_steps").get<int>();
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.validate();
}

std::uint64_t config_hash(const EnvConfig& cfg) {
  nlohmann::json j;
  to_json(j, cfg);
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

double wrap_angle(double theta) {
  double t = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (t <= 0.0) t += 2.0 * M_PI;
  return t - M_PI;  // (-pi, pi]
}

double violation(double x, double y, const EnvConfig& cfg) {
  const Vec2 p{x, y};
  const double d0 = dist(p, cfg.hazard_centers[0]);
  const double d1 = dist(p, cfg.hazard_centers[1]);
  return cfg.hazard_radius - std::min(d0, d1);
}

double goal_distance(double x, double y, const EnvConfig& cfg) {
  return dist(Vec2{x, y}, cfg.goal_center);
}

StepResult step(const EnvState& state, const Action& action, const EnvConfig& cfg) {
  if (!finite(state.x) || !finite(state.y) || !finite(state.v) || !finite(state.theta))
    throw InputError("step: non-finite state");
  if (!finite(action.accel) || !finite(action.turn))
    throw InputError("step: non-finite action");

  const double accel = clip(action.accel, -cfg.accel_bound, cfg.accel_bound);
  const double turn = clip(action.turn, -cfg.turn_bound, cfg.turn_bound);

  StepResult r;
  r.next.v = clip(state.v + accel * cfg.dt, cfg.v_min, cfg.v_max);
  r.next.theta = wrap_angle(state.theta + turn * cfg.dt);
  r.next.x = clip(state.x + r.next.v * std::cos(r.next.theta) * cfg.dt,
                  -cfg.arena_half_width, cfg.arena_half_width);
  r.next.y = clip(state.y + r.next.v * std::sin(r.next.theta) * cfg.dt,
                  -cfg.arena_half_width, cfg.arena_half_width);
  r.next.t = state.t + 1;

  r.reward = goal_distance(state.x, state.y, cfg) - goal_distance(r.next.x, r.next.y, cfg);
  r.h = violation(r.next.x, r.next.y, cfg);
  r.cost = std::max(r.h, 0.0);
  r.reached_goal = goal_distance(r.next.x, r.next.y, cfg) <= cfg.goal_radius;
  r.done = r.reached_goal || r.next.t >= cfg.max_steps;
  return r;
}

Action safest_action(const EnvState& state, const EnvConfig& cfg) {
  const Vec2 p{state.x, state.y};
  const double d0 = dist(p, cfg.hazard_centers[0]);
  const double d1 = dist(p, cfg.hazard_centers[1]);
  const Vec2& hz = (d0 <= d1) ? cfg.hazard_centers[0] : cfg.hazard_centers[1];

  const double bearing = std::atan2(hz.y - state.y, hz.x - state.x);
  const double rel = wrap_angle(bearing - state.theta);
  // Turn hard to the side that moves the heading away from the hazard.
  const double turn = (rel >= 0.0) ? -cfg.turn_bound : cfg.turn_bound;
  return Action{-cfg.accel_bound, turn};
}

std::vector<EnvState> oracle_rollout(const EnvState& state, const EnvConfig& cfg) {
  std::vector<EnvState> traj;
  traj.reserve(16);
  traj.push_back(state);
  EnvState s = state;
  if (violation(s.x, s.y, cfg) > 0.0) return traj;
  for (int i = 0; i < cfg.max_steps; ++i) {
    const StepResult r = step(s, safest_action(s, cfg), cfg);
    s = r.next;
    traj.push_back(s);
    if (r.h > 0.0) return traj;
    // Parked at zero speed: position is frozen and h no longer changes.
    if (cfg.v_min == 0.0 && s.v == 0.0) return traj;
  }
  return traj;
}

bool oracle_feasible(const EnvState& state, const EnvConfig& cfg) {
  const auto traj = oracle_rollout(state, cfg);
  for (const auto& s : traj)
    if (violation(s.x, s.y, cfg) > 0.0) return false;
  return true;
}

Action scripted_behavior(const EnvState& state, const EnvConfig& cfg, RngStream& rng,
                         double noise_accel, double noise_turn) {
  const Vec2 p{state.x, state.y};
  const double dist_goal = dist(p, cfg.goal_center);
  double gx = cfg.goal_center.x - state.x;
  double gy = cfg.goal_center.y - state.y;
  const double gn = std::max(dist_goal, 1e-9);
  gx /= gn;
  gy /= gn;

  // Hazard repulsion: radial push plus a tangential component that routes
  // around the disk on the goal side. Influence fades to zero at twice the
  // hazard radius (center distance).
  double rx = 0.0, ry = 0.0;
  for (const auto& hz : cfg.hazard_centers) {
    const double d = dist(p, hz);
    if (d >= 2.0 * cfg.hazard_radius) continue;
    const double w = (2.0 * cfg.hazard_radius - d) / (2.0 * cfg.hazard_radius);
    const double inv = 1.0 / std::max(d, 1e-9);
    const double ux = (state.x - hz.x) * inv;
    const double uy = (state.y - hz.y) * inv;
    // cr < 0: goal lies clockwise of the hazard bearing, pass on the right.
    const double cr = (hz.x - state.x) * (cfg.goal_center.y - state.y) -
                      (hz.y - state.y) * (cfg.goal_center.x - state.x);
    const double side = (cr >= 0.0) ? -1.0 : 1.0;
    rx += w * (ux + side * -uy);
    ry += w * (uy + side * ux);
  }

  double dx = gx + 1.5 * rx;
  double dy = gy + 1.5 * ry;
  if (dx * dx + dy * dy < 1e-18) {
    dx = gx;
    dy = gy;
  }

  const double heading_err = wrap_angle(std::atan2(dy, dx) - state.theta);
  const double v_des = cfg.v_max * std::min(1.0, dist_goal / 1.0);

  double turn = 4.0 * heading_err;
  double accel = 2.0 * (v_des - state.v);
  if (noise_turn > 0.0) turn += noise_turn * rng.normal();
  if (noise_accel > 0.0) accel += noise_accel * rng.normal();

  return Action{std::clamp(accel, -cfg.accel_bound, cfg.accel_bound),
                std::clamp(turn, -cfg.turn_bound, cfg.turn_bound)};
}

EnvState sample_start(const EnvConfig& cfg, RngStream& rng) {
  EnvState s;
  for (;;) {
    s.x = rng.uniform(-cfg.arena_half_width, cfg.arena_half_width);
    s.y = rng.uniform(-cfg.arena_half_width, cfg.arena_half_width);
    if (goal_distance(s.x, s.y, cfg) > cfg.goal_radius) break;
  }
  s.v = rng.uniform(cfg.v_min, cfg.v_max);
  s.theta = wrap_angle(rng.uniform(-M_PI, M_PI));
  s.t = 0;
  return s;
}

void observe(const EnvState& state, double* out5) {
  out5[0] = state.x;
  out5[1] = state.y;
  out5[2] = state.v;
  out5[3] = std::cos(state.theta);
  out5[4] = std::sin(state.theta);
}

std::vector<double> observe(const EnvState& state) {
  std::vector<double> o(kObsDim);
  observe(state, o.data());
  return o;
}

}  // namespace fisor
