#ifndef FISOR_PIPELINE_HPP
#define FISOR_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "fisor/critics.hpp"
#include "fisor/dataset.hpp"
#include "fisor/policy.hpp"
#include "fisor/run_config.hpp"

namespace fisor {

struct TrainArtifacts {
  CriticBank bank;
  Policy policy;
  DatasetStats stats;
  // Feasibility scoring for candidate selection: cost critics with a small
  // positive threshold under the no_hj ablation, Q_h/V_h at 0 otherwise.
  bool use_cost_feasibility = false;
  double feasibility_threshold = 0.0;
};

// Three decoupled stages: feasibility values, reward values, then weighted
// policy extraction against the frozen critics. Writes checkpoints, curve
// CSVs, stats and the resolved config into out_dir (no files when out_dir
// is empty). The critic checksum is asserted unchanged across stage 3.
TrainArtifacts train_full(const RunConfig& cfg, const Dataset& raw,
                          const std::string& out_dir);

// Stage split for callers that reuse critics across policy variants.
TrainArtifacts train_critics(const RunConfig& cfg, const Dataset& raw,
                             const std::string& out_dir);
void train_policy_stage(const RunConfig& cfg, const Dataset& raw, TrainArtifacts& artifacts,
                        const std::string& out_dir);

TrainArtifacts load_artifacts(const RunConfig& cfg, const std::string& dir);

// Draw N candidates from the policy and keep the one with the lowest
// feasibility score (max-pair Q_h, or Q_c under no_hj); ties break toward
// the lowest candidate index.
std::vector<double> select_action(const Policy& policy, const CriticBank& bank,
                                  bool use_cost, const double* obs_norm, int n_candidates,
                                  RngStream& rng);

double normalized_reward(double ret, double r_min, double r_max);
double normalized_cost(double cost, double limit, double eps);

struct EvalReport {
  int episodes = 0;
  std::string start_region;
  double cost_limit = 0.0;
  double eps_norm = 0.0;
  double reward_return_mean = 0.0;
  double cost_return_mean = 0.0;
  double normalized_reward = 0.0;
  double normalized_cost = 0.0;
  double goal_reach_rate = 0.0;
  double mean_violation_steps = 0.0;
  std::vector<double> episode_rewards;
  std::vector<double> episode_costs;
  std::vector<int> episode_violation_steps;
  std::vector<std::uint8_t> episode_reached_goal;
  std::vector<std::uint8_t> episode_start_feasible;

  struct Group {
    int episodes = 0;
    double normalized_reward = 0.0;
    double normalized_cost = 0.0;
    double goal_reach_rate = 0.0;
    double mean_violation_steps = 0.0;
  };
  Group feasible_start;
  Group infeasible_start;

  nlohmann::json to_json() const;
};

// Rolls out select_action from oracle-labelled starts; per-episode RNG is
// substream(seed, episode).
EvalReport evaluate(const TrainArtifacts& artifacts, const RunConfig& cfg,
                    const TrajectoryStats& traj, int episodes, StartRegion region,
                    std::uint64_t seed);

struct SliceSpec {
  double v = 1.0;
  bool theta_to_goal = true;
  double theta = 0.0;
};

struct RegionMetrics {
  double iou = 0.0;
  double false_feasible_rate = 0.0;
};

struct RegionDump {
  int res = 0;
  SliceSpec slice;
  std::vector<double> vh;
  std::vector<double> vc;  // empty without cost critics
  std::vector<std::uint8_t> oracle;
  RegionMetrics metrics_h;
  std::optional<RegionMetrics> metrics_c;
};

// V_h (and V_c when present) plus the ground-truth oracle on an (x, y)
// grid at a fixed (v, theta) slice.
RegionDump compute_region(const TrainArtifacts& artifacts, const RunConfig& cfg, int res,
                          const SliceSpec& slice);

// CSV (x, y, V_h[, V_c], oracle), SVG heatmap, metrics JSON.
void write_region_files(const RegionDump& dump, const RunConfig& cfg,
                        const std::string& out_dir);

}  // namespace fisor

#endif
