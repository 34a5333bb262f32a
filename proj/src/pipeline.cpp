#include "fisor/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fisor/checkpoint.hpp"
#include "fisor/errors.hpp"
#include "fisor/svg.hpp"

namespace fisor {

namespace {

namespace fs = std::filesystem;

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::io, "cannot open " + path);
  f << j.dump(2) << "\n";
}

void save_stats(const std::string& path, const DatasetStats& stats) {
  write_json_file(path, nlohmann::json{{"obs_mean", stats.obs_mean},
                                       {"obs_std", stats.obs_std},
                                       {"count", stats.count}});
}

DatasetStats load_stats(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError(DataError::Kind::io, "cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(f);
  DatasetStats st;
  st.obs_mean = j.at("obs_mean").get<std::vector<double>>();
  st.obs_std = j.at("obs_std").get<std::vector<double>>();
  st.count = j.at("count").get<std::uint64_t>();
  return st;
}

WeightKind weight_kind_for(Ablation a) {
  switch (a) {
    case Ablation::no_hj: return WeightKind::fisor_cost;
    case Ablation::no_infeasible: return WeightKind::fisor_no_infeasible;
    case Ablation::il_mode: return WeightKind::il;
    default: return WeightKind::fisor;
  }
}

void save_vfunc(const std::string& path, const VFunc& vf, std::uint64_t step,
                std::uint64_t seed) {
  save_checkpoint(path, vf.v, &vf.opt, step, seed);
}

void save_qpair(const std::string& dir, const std::string& name, const QPair& qp,
                std::uint64_t step, std::uint64_t seed) {
  save_checkpoint(dir + "/" + name + "1.net", qp.q1, &qp.opt1, step, seed);
  save_checkpoint(dir + "/" + name + "2.net", qp.q2, &qp.opt2, step, seed);
}

void load_vfunc(const std::string& path, VFunc& vf) {
  Checkpoint ckpt = load_checkpoint(path);
  vf.v = std::move(ckpt.net);
  if (ckpt.adam) vf.opt = std::move(*ckpt.adam);
}

void load_qpair(const std::string& dir, const std::string& name, QPair& qp) {
  Checkpoint c1 = load_checkpoint(dir + "/" + name + "1.net");
  Checkpoint c2 = load_checkpoint(dir + "/" + name + "2.net");
  qp.q1 = std::move(c1.net);
  qp.q2 = std::move(c2.net);
  qp.q1_tgt = qp.q1;
  qp.q2_tgt = qp.q2;
  if (c1.adam) qp.opt1 = std::move(*c1.adam);
  if (c2.adam) qp.opt2 = std::move(*c2.adam);
}

}  // namespace

TrainArtifacts train_critics(const RunConfig& cfg, const Dataset& raw,
                             const std::string& out_dir) {
  cfg.validate();
  if (!out_dir.empty()) fs::create_directories(out_dir);

  TrainArtifacts art;
  art.stats = cfg.normalize_obs ? compute_stats(raw) : identity_stats(raw.obs_dim);
  const Dataset ds = normalized_copy(raw, art.stats);

  const bool with_cost = cfg.ablation == Ablation::no_hj || cfg.train_cost_critics;
  RngStream init_rng = RngStream::substream(cfg.seed, 0);
  art.bank = CriticBank::init(ds.obs_dim, ds.act_dim, cfg.critic_hidden, cfg.critic,
                              init_rng, with_cost);
  art.use_cost_feasibility = cfg.ablation == Ablation::no_hj;
  art.feasibility_threshold = art.use_cost_feasibility ? cfg.cost_region_threshold : 0.0;

  CurveLog log(out_dir.empty() ? std::string() : out_dir + "/value_curves.csv");

  if (cfg.ablation == Ablation::no_hj) {
    RngStream rng = RngStream::substream(cfg.seed, 1);
    train_cost_values(art.bank, ds, cfg.feasible_steps, rng, &log);
  } else {
    RngStream rng = RngStream::substream(cfg.seed, 1);
    train_feasible_values(art.bank, ds, cfg.feasible_steps, rng, &log);
    if (cfg.train_cost_critics) {
      RngStream crng = RngStream::substream(cfg.seed, 4);
      train_cost_values(art.bank, ds, cfg.feasible_steps, crng, &log);
    }
  }

  if (cfg.ablation != Ablation::il_mode) {
    RngStream rng = RngStream::substream(cfg.seed, 2);
    train_reward_values(art.bank, ds, cfg.reward_steps, rng, &log);
  }

  if (!out_dir.empty()) {
    save_vfunc(out_dir + "/vh.net", art.bank.vh, cfg.feasible_steps, cfg.seed);
    save_qpair(out_dir, "qh", art.bank.qh, cfg.feasible_steps, cfg.seed);
    save_vfunc(out_dir + "/vr.net", art.bank.vr, cfg.reward_steps, cfg.seed);
    save_qpair(out_dir, "qr", art.bank.qr, cfg.reward_steps, cfg.seed);
    if (art.bank.vc) save_vfunc(out_dir + "/vc.net", *art.bank.vc, cfg.feasible_steps, cfg.seed);
    if (art.bank.qc) save_qpair(out_dir, "qc", *art.bank.qc, cfg.feasible_steps, cfg.seed);
    save_stats(out_dir + "/stats.json", art.stats);
    nlohmann::json cfg_j;
    to_json(cfg_j, cfg);
    write_json_file(out_dir + "/config.json", cfg_j);
  }
  return art;
}

void train_policy_stage(const RunConfig& cfg, const Dataset& raw, TrainArtifacts& artifacts,
                        const std::string& out_dir) {
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const Dataset ds = normalized_copy(raw, artifacts.stats);

  const std::uint64_t checksum_before = artifacts.bank.checksum();
  const std::vector<double> weights =
      compute_weights(artifacts.bank, ds, weight_kind_for(cfg.ablation), cfg.weight,
                      cfg.cost_region_threshold);

  DiffusionHyper hyper;
  hyper.lr = cfg.diffusion.lr;
  hyper.batch = cfg.diffusion.batch;
  hyper.log_every = cfg.diffusion.log_every;

  PolicyCurveLog log(out_dir.empty() ? std::string() : out_dir + "/policy_curves.csv");

  Policy& policy = artifacts.policy;
  policy.act_lo = {-cfg.env.accel_bound, -cfg.env.turn_bound};
  policy.act_hi = {cfg.env.accel_bound, cfg.env.turn_bound};

  RngStream init_rng = RngStream::substream(cfg.seed, 5);
  RngStream train_rng = RngStream::substream(cfg.seed, 3);
  if (cfg.ablation == Ablation::no_diffusion) {
    policy.kind = Policy::Kind::gaussian;
    std::vector<int> widths;
    widths.push_back(ds.obs_dim);
    widths.insert(widths.end(), cfg.diffusion.hidden.begin(), cfg.diffusion.hidden.end());
    widths.push_back(ds.act_dim);
    policy.gauss_mean = Mlp::init(widths, init_rng);
    AdamState opt = AdamState::like(policy.gauss_mean, hyper.lr);
    train_gaussian_policy(policy.gauss_mean, opt, ds, weights, cfg.diffusion.steps, hyper,
                          train_rng, &log);
  } else {
    policy.kind = Policy::Kind::diffusion;
    policy.schedule = NoiseSchedule::cosine(cfg.diffusion.T);
    policy.predictor =
        NoisePredictor::init(ds.obs_dim, ds.act_dim, cfg.diffusion.hidden, init_rng);
    AdamState opt = AdamState::like(policy.predictor.net, hyper.lr);
    train_diffusion_policy(policy.predictor, opt, policy.schedule, ds, weights,
                           cfg.diffusion.steps, hyper, train_rng, &log);
  }

  if (artifacts.bank.checksum() != checksum_before)
    throw std::logic_error("policy stage mutated critic parameters");

  if (!out_dir.empty()) policy.save(out_dir + "/policy.net", cfg.diffusion.steps, cfg.seed);
}

TrainArtifacts train_full(const RunConfig& cfg, const Dataset& raw,
                          const std::string& out_dir) {
  TrainArtifacts art = train_critics(cfg, raw, out_dir);
  train_policy_stage(cfg, raw, art, out_dir);
  return art;
}

TrainArtifacts load_artifacts(const RunConfig& cfg, const std::string& dir) {
  TrainArtifacts art;
  art.stats = load_stats(dir + "/stats.json");
  const bool with_cost = cfg.ablation == Ablation::no_hj || cfg.train_cost_critics;
  RngStream init_rng = RngStream::substream(cfg.seed, 0);
  art.bank = CriticBank::init(kObsDim, kActDim, cfg.critic_hidden, cfg.critic, init_rng,
                              with_cost);
  load_vfunc(dir + "/vh.net", art.bank.vh);
  load_qpair(dir, "qh", art.bank.qh);
  load_vfunc(dir + "/vr.net", art.bank.vr);
  load_qpair(dir, "qr", art.bank.qr);
  if (with_cost) {
    load_vfunc(dir + "/vc.net", *art.bank.vc);
    load_qpair(dir, "qc", *art.bank.qc);
  }
  art.policy = Policy::load(dir + "/policy.net");
  art.use_cost_feasibility = cfg.ablation == Ablation::no_hj;
  art.feasibility_threshold = art.use_cost_feasibility ? cfg.cost_region_threshold : 0.0;
  return art;
}

std::vector<double> select_action(const Policy& policy, const CriticBank& bank,
                                  bool use_cost, const double* obs_norm, int n_candidates,
                                  RngStream& rng) {
  std::vector<double> best;
  double best_score = 0.0;
  for (int i = 0; i < n_candidates; ++i) {
    std::vector<double> cand = policy.sample(obs_norm, rng);
    const double score = use_cost ? bank.q_c(obs_norm, cand.data())
                                  : bank.q_h(obs_norm, cand.data());
    if (i == 0 || score < best_score) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

double normalized_reward(double ret, double r_min, double r_max) {
  const double denom = r_max - r_min;
  return denom != 0.0 ? (ret - r_min) / denom : 0.0;
}

double normalized_cost(double cost, double limit, double eps) {
  return (cost + eps) / (limit + eps);
}

nlohmann::json EvalReport::to_json() const {
  auto group_json = [](const Group& g) {
    return nlohmann::json{{"episodes", g.episodes},
                          {"normalized_reward", g.normalized_reward},
                          {"normalized_cost", g.normalized_cost},
                          {"goal_reach_rate", g.goal_reach_rate},
                          {"mean_violation_steps", g.mean_violation_steps}};
  };
  return nlohmann::json{
      {"episodes", episodes},
      {"start_region", start_region},
      {"cost_limit", cost_limit},
      {"eps_norm", eps_norm},
      {"reward_return_mean", reward_return_mean},
      {"cost_return_mean", cost_return_mean},
      {"normalized_reward", normalized_reward},
      {"normalized_cost", normalized_cost},
      {"goal_reach_rate", goal_reach_rate},
      {"mean_violation_steps", mean_violation_steps},
      {"episode_rewards", episode_rewards},
      {"episode_costs", episode_costs},
      {"episode_violation_steps", episode_violation_steps},
      {"episode_reached_goal", episode_reached_goal},
      {"episode_start_feasible", episode_start_feasible},
      {"feasible_start", group_json(feasible_start)},
      {"infeasible_start", group_json(infeasible_start)},
  };
}

EvalReport evaluate(const TrainArtifacts& artifacts, const RunConfig& cfg,
                    const TrajectoryStats& traj, int episodes, StartRegion region,
                    std::uint64_t seed) {
  const EnvConfig& env = cfg.env;
  EvalReport rep;
  rep.episodes = episodes;
  rep.start_region = to_string(region);
  rep.cost_limit = cfg.eval.cost_limit;
  rep.eps_norm = cfg.eval.eps_norm;

  for (int ep = 0; ep < episodes; ++ep) {
    RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(ep));

    EnvState s;
    bool start_feasible = false;
    for (int tries = 0;; ++tries) {
      s = sample_start(env, rng);
      start_feasible = oracle_feasible(s, env);
      if (region == StartRegion::any) break;
      if (region == StartRegion::feasible && start_feasible) break;
      if (region == StartRegion::infeasible && !start_feasible) break;
      if (tries > 100000)
        throw ConfigError("evaluate: could not sample a start in the requested region");
    }

    double ep_reward = 0.0;
    double ep_cost = std::max(violation(s.x, s.y, env), 0.0);
    int ep_violations = violation(s.x, s.y, env) > 0.0 ? 1 : 0;
    bool reached = false;
    for (;;) {
      const auto obs_n = normalize(observe(s), artifacts.stats);
      const auto act = select_action(artifacts.policy, artifacts.bank,
                                     artifacts.use_cost_feasibility, obs_n.data(),
                                     cfg.eval.n_candidates, rng);
      const StepResult r = step(s, Action{act[0], act[1]}, env);
      ep_reward += r.reward;
      ep_cost += r.cost;
      if (r.h > 0.0) ++ep_violations;
      s = r.next;
      if (r.done) {
        reached = r.reached_goal;
        break;
      }
    }

    rep.episode_rewards.push_back(ep_reward);
    rep.episode_costs.push_back(ep_cost);
    rep.episode_violation_steps.push_back(ep_violations);
    rep.episode_reached_goal.push_back(reached ? 1 : 0);
    rep.episode_start_feasible.push_back(start_feasible ? 1 : 0);
  }

  auto aggregate = [&](auto filter) {
    EvalReport::Group g;
    double rew = 0.0, cost = 0.0, viol = 0.0;
    int goals = 0;
    for (int i = 0; i < episodes; ++i) {
      if (!filter(i)) continue;
      ++g.episodes;
      rew += rep.episode_rewards[i];
      cost += rep.episode_costs[i];
      viol += rep.episode_violation_steps[i];
      goals += rep.episode_reached_goal[i];
    }
    if (g.episodes > 0) {
      g.normalized_reward =
          normalized_reward(rew / g.episodes, traj.return_min, traj.return_max);
      g.normalized_cost =
          normalized_cost(cost / g.episodes, cfg.eval.cost_limit, cfg.eval.eps_norm);
      g.goal_reach_rate = static_cast<double>(goals) / g.episodes;
      g.mean_violation_steps = viol / g.episodes;
    }
    return g;
  };

  const auto all = aggregate([](int) { return true; });
  rep.reward_return_mean =
      rep.episode_rewards.empty()
          ? 0.0
          : std::accumulate(rep.episode_rewards.begin(), rep.episode_rewards.end(), 0.0) /
                episodes;
  rep.cost_return_mean =
      rep.episode_costs.empty()
          ? 0.0
          : std::accumulate(rep.episode_costs.begin(), rep.episode_costs.end(), 0.0) /
                episodes;
  rep.normalized_reward = all.normalized_reward;
  rep.normalized_cost = all.normalized_cost;
  rep.goal_reach_rate = all.goal_reach_rate;
  rep.mean_violation_steps = all.mean_violation_steps;
  rep.feasible_start = aggregate([&](int i) { return rep.episode_start_feasible[i] == 1; });
  rep.infeasible_start =
      aggregate([&](int i) { return rep.episode_start_feasible[i] == 0; });
  return rep;
}

RegionDump compute_region(const TrainArtifacts& artifacts, const RunConfig& cfg, int res,
                          const SliceSpec& slice) {
  if (res < 2) throw ConfigError("compute_region: resolution must be >= 2");
  const EnvConfig& env = cfg.env;
  RegionDump dump;
  dump.res = res;
  dump.slice = slice;
  dump.vh.resize(static_cast<std::size_t>(res) * res);
  dump.oracle.resize(static_cast<std::size_t>(res) * res);
  const bool has_cost = artifacts.bank.vc.has_value();
  if (has_cost) dump.vc.resize(static_cast<std::size_t>(res) * res);

  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      EnvState s;
      s.x = -env.arena_half_width + (ix + 0.5) * 2.0 * env.arena_half_width / res;
      s.y = -env.arena_half_width + (iy + 0.5) * 2.0 * env.arena_half_width / res;
      s.v = slice.v;
      s.theta = slice.theta_to_goal
                    ? std::atan2(env.goal_center.y - s.y, env.goal_center.x - s.x)
                    : slice.theta;
      const std::size_t idx = static_cast<std::size_t>(iy) * res + ix;
      const auto obs_n = normalize(observe(s), artifacts.stats);
      dump.vh[idx] = artifacts.bank.v_h(obs_n.data());
      if (has_cost) dump.vc[idx] = artifacts.bank.v_c(obs_n.data());
      dump.oracle[idx] = oracle_feasible(s, env) ? 1 : 0;
    }
  }

  auto metrics = [&](const std::vector<double>& grid, double threshold) {
    RegionMetrics m;
    std::size_t inter = 0, uni = 0, infeas = 0, false_feas = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const bool pred = grid[i] <= threshold;
      const bool orc = dump.oracle[i] == 1;
      if (pred && orc) ++inter;
      if (pred || orc) ++uni;
      if (!orc) {
        ++infeas;
        if (pred) ++false_feas;
      }
    }
    m.iou = uni > 0 ? static_cast<double>(inter) / uni : 1.0;
    m.false_feasible_rate = infeas > 0 ? static_cast<double>(false_feas) / infeas : 0.0;
    return m;
  };
  dump.metrics_h = metrics(dump.vh, 0.0);
  if (has_cost) dump.metrics_c = metrics(dump.vc, cfg.cost_region_threshold);
  return dump;
}

void write_region_files(const RegionDump& dump, const RunConfig& cfg,
                        const std::string& out_dir) {
  fs::create_directories(out_dir);
  const int res = dump.res;
  const EnvConfig& env = cfg.env;

  std::ofstream csv(out_dir + "/region.csv", std::ios::trunc);
  if (!csv) throw DataError(DataError::Kind::io, "cannot open region.csv");
  csv << (dump.vc.empty() ? "x,y,v_h,oracle\n" : "x,y,v_h,v_c,oracle\n");
  char line[256];
  for (int iy = 0; iy < res; ++iy)
    for (int ix = 0; ix < res; ++ix) {
      const double x = -env.arena_half_width + (ix + 0.5) * 2.0 * env.arena_half_width / res;
      const double y = -env.arena_half_width + (iy + 0.5) * 2.0 * env.arena_half_width / res;
      const std::size_t idx = static_cast<std::size_t>(iy) * res + ix;
      if (dump.vc.empty())
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%d\n", x, y, dump.vh[idx],
                      static_cast<int>(dump.oracle[idx]));
      else
        std::snprintf(line, sizeof(line), "%.17g,%.17g,%.17g,%.17g,%d\n", x, y, dump.vh[idx],
                      dump.vc[idx], static_cast<int>(dump.oracle[idx]));
      csv << line;
    }

  write_region_svg(out_dir + "/region.svg", env, res, dump.vh, dump.oracle);
  if (!dump.vc.empty())
    write_region_svg(out_dir + "/region_cost.svg", env, res, dump.vc, dump.oracle);

  nlohmann::json metrics{
      {"resolution", res},
      {"slice",
       {{"v", dump.slice.v},
        {"theta_to_goal", dump.slice.theta_to_goal},
        {"theta", dump.slice.theta}}},
      {"v_h", {{"iou", dump.metrics_h.iou},
               {"false_feasible_rate", dump.metrics_h.false_feasible_rate}}},
  };
  if (dump.metrics_c)
    metrics["v_c"] = {{"iou", dump.metrics_c->iou},
                      {"false_feasible_rate", dump.metrics_c->false_feasible_rate},
                      {"threshold", cfg.cost_region_threshold}};
  write_json_file(out_dir + "/region_metrics.json", metrics);
}

}  // namespace fisor
