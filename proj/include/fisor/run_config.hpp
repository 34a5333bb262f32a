#ifndef FISOR_RUN_CONFIG_HPP
#define FISOR_RUN_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fisor/critics.hpp"
#include "fisor/diffusion.hpp"
#include "fisor/env.hpp"
#include "fisor/weights.hpp"

#include "json.hpp"

namespace fisor {

enum class Ablation { full, no_hj, no_infeasible, no_diffusion, il_mode };

std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

enum class StartRegion { feasible, infeasible, any };

std::string to_string(StartRegion r);
StartRegion start_region_from_string(const std::string& s);

// One run = one config + one seed. Defaults follow the reference
// hyperparameter table; step counts and widths are desk-scale knobs.
struct RunConfig {
  EnvConfig env;

  struct DataCfg {
    std::string path = "dataset.bin";
    std::uint64_t n_scripted = 50000;
    std::uint64_t n_random = 50000;
    std::string h_mode = "geometric";  // or "sparse"
    double sparse_m = 25.0;
    double noise_accel = 0.3;
    double noise_turn = 0.8;
  } data;

  CriticHyper critic;
  std::vector<int> critic_hidden{256, 256};
  std::uint64_t feasible_steps = 200000;
  std::uint64_t reward_steps = 200000;

  WeightConfig weight;
  double cost_region_threshold = 1e-3;  // {V_c <= eps} region for no_hj

  struct DiffusionCfg {
    int T = 5;
    std::vector<int> hidden{256, 256, 256};
    int batch = 2048;
    double lr = 3e-4;
    std::uint64_t steps = 200000;
    int log_every = 1000;
  } diffusion;

  struct EvalCfg {
    int n_candidates = 16;
    int episodes = 100;
    double cost_limit = 5.0;
    double eps_norm = 0.0;
    std::string start_region = "feasible";
  } eval;

  Ablation ablation = Ablation::full;
  bool normalize_obs = true;
  bool train_cost_critics = false;  // also fit Q_c/V_c on the full variant
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& cfg);
void from_json(const nlohmann::json& j, RunConfig& cfg);

RunConfig load_run_config(const std::string& path);

// Applies "a.b.c=value" onto the JSON form; the key path must already
// exist. Values parse as JSON scalars, falling back to strings.
void apply_override(nlohmann::json& j, const std::string& assignment);

std::uint64_t run_config_hash(const RunConfig& cfg);

}  // namespace fisor

#endif
