#include "fisor/run_config.hpp"

#include <fstream>

#include "fisor/errors.hpp"

namespace fisor {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_hj: return "no_hj";
    case Ablation::no_infeasible: return "no_infeasible";
    case Ablation::no_diffusion: return "no_diffusion";
    case Ablation::il_mode: return "il_mode";
  }
  return "full";
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no_hj") return Ablation::no_hj;
  if (s == "no_infeasible") return Ablation::no_infeasible;
  if (s == "no_diffusion") return Ablation::no_diffusion;
  if (s == "il_mode") return Ablation::il_mode;
  throw ConfigError("unknown ablation variant: " + s);
}

std::string to_string(StartRegion r) {
  switch (r) {
    case StartRegion::feasible: return "feasible";
    case StartRegion::infeasible: return "infeasible";
    case StartRegion::any: return "any";
  }
  return "feasible";
}

StartRegion start_region_from_string(const std::string& s) {
  if (s == "feasible") return StartRegion::feasible;
  if (s == "infeasible") return StartRegion::infeasible;
  if (s == "any") return StartRegion::any;
  throw ConfigError("unknown start region: " + s);
}

void RunConfig::validate() const {
  env.validate();
  critic.validate();
  weight.validate();
  if (data.h_mode != "geometric" && data.h_mode != "sparse")
    throw ConfigError("data.h_mode must be 'geometric' or 'sparse'");
  if (!(data.sparse_m > 0.0)) throw ConfigError("data.sparse_m must be > 0");
  if (diffusion.T < 1) throw ConfigError("diffusion.T must be >= 1");
  if (diffusion.batch < 1) throw ConfigError("diffusion.batch must be >= 1");
  if (eval.n_candidates < 1) throw ConfigError("eval.n_candidates must be >= 1");
  if (eval.episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  if (!(eval.cost_limit >= 0.0)) throw ConfigError("eval.cost_limit must be >= 0");
  if (eval.cost_limit == 0.0 && !(eval.eps_norm > 0.0))
    throw ConfigError("eval.eps_norm must be > 0 when the cost limit is 0");
  if (!(cost_region_threshold > 0.0))
    throw ConfigError("cost_region_threshold must be > 0");
  start_region_from_string(eval.start_region);
  for (int w : critic_hidden)
    if (w < 1) throw ConfigError("critic_hidden widths must be positive");
  for (int w : diffusion.hidden)
    if (w < 1) throw ConfigError("diffusion.hidden widths must be positive");
}

void to_json(nlohmann::json& j, const RunConfig& cfg) {
  nlohmann::json env_j = cfg.env;
  j = nlohmann::json{
      {"env", env_j},
      {"data",
       {{"path", cfg.data.path},
        {"n_scripted", cfg.data.n_scripted},
        {"n_random", cfg.data.n_random},
        {"h_mode", cfg.data.h_mode},
        {"sparse_m", cfg.data.sparse_m},
        {"noise_accel", cfg.data.noise_accel},
        {"noise_turn", cfg.data.noise_turn}}},
      {"critic",
       {{"gamma", cfg.critic.gamma},
        {"tau", cfg.critic.tau},
        {"soft_alpha", cfg.critic.soft_alpha},
        {"lr", cfg.critic.lr},
        {"batch", cfg.critic.batch},
        {"log_every", cfg.critic.log_every},
        {"hidden", cfg.critic_hidden},
        {"feasible_steps", cfg.feasible_steps},
        {"reward_steps", cfg.reward_steps}}},
      {"weight",
       {{"alpha1", cfg.weight.alpha1},
        {"alpha2", cfg.weight.alpha2},
        {"clip_feasible", cfg.weight.clip_feasible},
        {"clip_infeasible", cfg.weight.clip_infeasible}}},
      {"cost_region_threshold", cfg.cost_region_threshold},
      {"diffusion",
       {{"T", cfg.diffusion.T},
        {"hidden", cfg.diffusion.hidden},
        {"batch", cfg.diffusion.batch},
        {"lr", cfg.diffusion.lr},
        {"steps", cfg.diffusion.steps},
        {"log_every", cfg.diffusion.log_every}}},
      {"eval",
       {{"n_candidates", cfg.eval.n_candidates},
        {"episodes", cfg.eval.episodes},
        {"cost_limit", cfg.eval.cost_limit},
        {"eps_norm", cfg.eval.eps_norm},
        {"start_region", cfg.eval.start_region}}},
      {"ablation", to_string(cfg.ablation)},
      {"normalize_obs", cfg.normalize_obs},
      {"train_cost_critics", cfg.train_cost_critics},
      {"seed", cfg.seed},
  };
}

void from_json(const nlohmann::json& j, RunConfig& cfg) {
  cfg.env = j.at("env").get<EnvConfig>();
  const auto& d = j.at("data");
  cfg.data.path = d.at("path").get<std::string>();
  cfg.data.n_scripted = d.at("n_scripted").get<std::uint64_t>();
  cfg.data.n_random = d.at("n_random").get<std::uint64_t>();
  cfg.data.h_mode = d.at("h_mode").get<std::string>();
  cfg.data.sparse_m = d.at("sparse_m").get<double>();
  cfg.data.noise_accel = d.at("noise_accel").get<double>();
  cfg.data.noise_turn = d.at("noise_turn").get<double>();

  const auto& c = j.at("critic");
  cfg.critic.gamma = c.at("gamma").get<double>();
  cfg.critic.tau = c.at("tau").get<double>();
  cfg.critic.soft_alpha = c.at("soft_alpha").get<double>();
  cfg.critic.lr = c.at("lr").get<double>();
  cfg.critic.batch = c.at("batch").get<int>();
  cfg.critic.log_every = c.at("log_every").get<int>();
  cfg.critic_hidden = c.at("hidden").get<std::vector<int>>();
  cfg.feasible_steps = c.at("feasible_steps").get<std::uint64_t>();
  cfg.reward_steps = c.at("reward_steps").get<std::uint64_t>();

  const auto& w = j.at("weight");
  cfg.weight.alpha1 = w.at("alpha1").get<double>();
  cfg.weight.alpha2 = w.at("alpha2").get<double>();
  cfg.weight.clip_feasible = w.at("clip_feasible").get<double>();
  cfg.weight.clip_infeasible = w.at("clip_infeasible").get<double>();
  cfg.cost_region_threshold = j.at("cost_region_threshold").get<double>();

  const auto& f = j.at("diffusion");
  cfg.diffusion.T = f.at("T").get<int>();
  cfg.diffusion.hidden = f.at("hidden").get<std::vector<int>>();
  cfg.diffusion.batch = f.at("batch").get<int>();
  cfg.diffusion.lr = f.at("lr").get<double>();
  cfg.diffusion.steps = f.at("steps").get<std::uint64_t>();
  cfg.diffusion.log_every = f.at("log_every").get<int>();

  const auto& e = j.at("eval");
  cfg.eval.n_candidates = e.at("n_candidates").get<int>();
  cfg.eval.episodes = e.at("episodes").get<int>();
  cfg.eval.cost_limit = e.at("cost_limit").get<double>();
  cfg.eval.eps_norm = e.at("eps_norm").get<double>();
  cfg.eval.start_region = e.at("start_region").get<std::string>();

  cfg.ablation = ablation_from_string(j.at("ablation").get<std::string>());
  cfg.normalize_obs = j.at("normalize_obs").get<bool>();
  cfg.train_cost_critics = j.at("train_cost_critics").get<bool>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.validate();
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
  try {
    // Overlay onto defaults so configs may be partial.
    nlohmann::json base;
    to_json(base, RunConfig{});
    base.merge_patch(j);
    return base.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string keypath = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  nlohmann::json* node = &j;
  std::size_t pos = 0;
  while (pos < keypath.size()) {
    const auto dot = keypath.find('.', pos);
    const std::string key =
        keypath.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->is_object() || !node->contains(key))
      throw ConfigError("override references unknown config key: " + keypath);
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }

  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;  // plain string
  *node = parsed;
}

std::uint64_t run_config_hash(const RunConfig& cfg) {
  nlohmann::json j;
  to_json(j, cfg);
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace fisor
