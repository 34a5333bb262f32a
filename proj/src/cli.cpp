#include "fisor/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "fisor/errors.hpp"
#include "fisor/pipeline.hpp"

#include "CLI11.hpp"

namespace fisor::cli {

namespace {

namespace fs = std::filesystem;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string run_id;
  std::int64_t seed = -1;  // -1: keep config value
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_out = true) {
  cmd->add_option("--config", opts.config_path, "JSON run config (partial configs overlay defaults)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides,
                  "dot-path override applied after the config file, e.g. critic.tau=0.8");
  if (with_out)
    cmd->add_option("--out", opts.out_dir,
                    "output root (default $FISOR_OUT_ROOT or ./runs)");
  cmd->add_option("--run-id", opts.run_id,
                  "run directory name (default derived from config hash and seed)");
  cmd->add_option("--seed", opts.seed, "master seed override");
}

RunConfig resolve_config(const CommonOpts& opts) {
  nlohmann::json j;
  to_json(j, RunConfig{});
  if (!opts.config_path.empty()) {
    std::ifstream f(opts.config_path);
    if (!f) throw ConfigError("cannot open config file: " + opts.config_path);
    nlohmann::json user = nlohmann::json::parse(f, nullptr, false);
    if (user.is_discarded())
      throw ConfigError("config file is not valid JSON: " + opts.config_path);
    j.merge_patch(user);
  }
  for (const auto& assignment : opts.overrides) apply_override(j, assignment);
  RunConfig cfg;
  try {
    cfg = j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  cfg.validate();
  return cfg;
}

std::string out_root(const CommonOpts& opts) {
  if (!opts.out_dir.empty()) return opts.out_dir;
  if (const char* env = std::getenv("FISOR_OUT_ROOT")) return env;
  return "runs";
}

std::string run_dir_for(const CommonOpts& opts, const RunConfig& cfg) {
  std::string id = opts.run_id;
  if (id.empty()) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "run-%08llx-s%llu",
                  static_cast<unsigned long long>(run_config_hash(cfg) & 0xffffffffull),
                  static_cast<unsigned long long>(cfg.seed));
    id = buf;
  }
  return out_root(opts) + "/" + id;
}

Dataset load_dataset_checked(const RunConfig& cfg, const std::string& data_path) {
  const std::string path = data_path.empty() ? cfg.data.path : data_path;
  Dataset ds = load(path);
  if (ds.env_hash != config_hash(cfg.env))
    std::fprintf(stderr,
                 "warning: dataset %s was generated under a different env config "
                 "(hash mismatch)\n",
                 path.c_str());
  attach_h_next(ds, cfg.env);
  return ds;
}

void print_eval_summary(const EvalReport& rep) {
  std::printf("episodes=%d start=%s norm_reward=%.4f norm_cost=%.4f goal_rate=%.3f "
              "violation_steps=%.2f\n",
              rep.episodes, rep.start_region.c_str(), rep.normalized_reward,
              rep.normalized_cost, rep.goal_reach_rate, rep.mean_violation_steps);
}

void write_report(const std::string& path, const EvalReport& rep) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::io, "cannot open " + path);
  f << rep.to_json().dump(2) << "\n";
}

int cmd_gen_data(const CommonOpts& opts) {
  const RunConfig cfg = resolve_config(opts);
  Dataset ds = generate(cfg.env, cfg.data.n_scripted, cfg.data.n_random, cfg.seed,
                        cfg.data.noise_accel, cfg.data.noise_turn);
  if (cfg.data.h_mode == "sparse") ds = relabel_sparse_h(ds, cfg.data.sparse_m);
  std::string path = cfg.data.path;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    path = opts.out_dir + "/dataset.bin";
  }
  save(ds, path);
  std::printf("wrote %s (%zu transitions, %s h) and %s\n", path.c_str(), ds.size(),
              cfg.data.h_mode.c_str(), manifest_path(path).c_str());
  return exit_code::ok;
}

int cmd_train(const CommonOpts& opts, const std::string& data_path,
              const std::string& variant) {
  RunConfig cfg = resolve_config(opts);
  if (!variant.empty()) cfg.ablation = ablation_from_string(variant);
  const Dataset ds = load_dataset_checked(cfg, data_path);
  const std::string dir = run_dir_for(opts, cfg);
  train_full(cfg, ds, dir);
  std::printf("trained %s variant into %s\n", to_string(cfg.ablation).c_str(), dir.c_str());
  return exit_code::ok;
}

int cmd_eval(const CommonOpts& opts, const std::string& run_dir,
             const std::string& data_path, int episodes, const std::string& region,
             int candidates, std::int64_t eval_seed) {
  CommonOpts effective = opts;
  if (effective.config_path.empty()) {
    const std::string cfg_path = run_dir + "/config.json";
    if (!fs::exists(cfg_path))
      throw ConfigError("no config.json in " + run_dir + "; pass --config");
    effective.config_path = cfg_path;
  }
  RunConfig cfg = resolve_config(effective);
  if (episodes > 0) cfg.eval.episodes = episodes;
  if (!region.empty()) cfg.eval.start_region = region;
  if (candidates > 0) cfg.eval.n_candidates = candidates;
  cfg.validate();

  const Dataset ds = load_dataset_checked(cfg, data_path);
  const TrainArtifacts art = load_artifacts(cfg, run_dir);
  const std::uint64_t seed =
      eval_seed >= 0 ? static_cast<std::uint64_t>(eval_seed) : cfg.seed + 1000003;
  const EvalReport rep =
      evaluate(art, cfg, ds.traj, cfg.eval.episodes,
               start_region_from_string(cfg.eval.start_region), seed);
  write_report(run_dir + "/eval_report.json", rep);
  print_eval_summary(rep);
  return exit_code::ok;
}

int cmd_dump_region(const CommonOpts& opts, const std::string& run_dir, int res,
                    double slice_v, double slice_theta, bool theta_fixed) {
  CommonOpts effective = opts;
  if (effective.config_path.empty()) {
    const std::string cfg_path = run_dir + "/config.json";
    if (!fs::exists(cfg_path))
      throw ConfigError("no config.json in " + run_dir + "; pass --config");
    effective.config_path = cfg_path;
  }
  const RunConfig cfg = resolve_config(effective);
  const TrainArtifacts art = load_artifacts(cfg, run_dir);
  SliceSpec slice;
  slice.v = slice_v;
  slice.theta_to_goal = !theta_fixed;
  slice.theta = slice_theta;
  const RegionDump dump = compute_region(art, cfg, res, slice);
  write_region_files(dump, cfg, run_dir);
  std::printf("region %dx%d: IoU=%.4f false_feasible=%.4f", res, res, dump.metrics_h.iou,
              dump.metrics_h.false_feasible_rate);
  if (dump.metrics_c)
    std::printf("  (cost-value region: IoU=%.4f false_feasible=%.4f)",
                dump.metrics_c->iou, dump.metrics_c->false_feasible_rate);
  std::printf("\n");
  return exit_code::ok;
}

int cmd_sweep(const CommonOpts& opts, const std::string& param,
              const std::string& data_path) {
  RunConfig base = resolve_config(opts);
  const Dataset ds = load_dataset_checked(base, data_path);
  const std::string root = out_root(opts);
  fs::create_directories(root);

  const std::string csv_path = root + "/sweep_" + param + ".csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw DataError(DataError::Kind::io, "cannot open " + csv_path);
  csv << "param,value,normalized_reward,normalized_cost,goal_reach_rate,"
         "mean_violation_steps\n";

  auto eval_row = [&](const RunConfig& cfg, const TrainArtifacts& art, double value) {
    const EvalReport rep =
        evaluate(art, cfg, ds.traj, cfg.eval.episodes,
                 start_region_from_string(cfg.eval.start_region), cfg.seed + 1000003);
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%g,%.17g,%.17g,%.17g,%.17g\n", param.c_str(),
                  value, rep.normalized_reward, rep.normalized_cost, rep.goal_reach_rate,
                  rep.mean_violation_steps);
    csv << line;
    std::printf("%s=%g norm_reward=%.4f norm_cost=%.4f\n", param.c_str(), value,
                rep.normalized_reward, rep.normalized_cost);
  };

  if (param == "tau") {
    for (const double tau : {0.7, 0.8, 0.9, 0.95}) {
      RunConfig cfg = base;
      cfg.critic.tau = tau;
      char sub[32];
      std::snprintf(sub, sizeof(sub), "tau_%g", tau);
      const TrainArtifacts art = train_full(cfg, ds, root + "/" + sub);
      eval_row(cfg, art, tau);
    }
  } else if (param == "n") {
    // N only affects action selection, so one trained policy serves all rows.
    const TrainArtifacts art = train_full(base, ds, root + "/n_base");
    for (const int n : {1, 4, 16, 64}) {
      RunConfig cfg = base;
      cfg.eval.n_candidates = n;
      eval_row(cfg, art, n);
    }
  } else {
    throw ConfigError("sweep --param must be 'tau' or 'n'");
  }
  std::printf("wrote %s\n", csv_path.c_str());
  return exit_code::ok;
}

std::string config_reference() {
  nlohmann::json j;
  to_json(j, RunConfig{});
  return "Config keys and defaults (JSON, overridable with --set):\n" + j.dump(2) + "\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"fisor: safe offline RL on a reach-avoid task — feasibility-guided "
               "critics, weighted diffusion-policy extraction, evaluation tooling"};
  app.require_subcommand(1);
  app.footer(config_reference());

  CommonOpts gen_opts, train_opts, eval_opts, region_opts, ablate_opts, sweep_opts;
  std::string train_data, ablate_data, eval_data, sweep_data;
  std::string ablate_variant;
  std::string eval_run, region_run;
  int eval_episodes = 0, eval_candidates = 0;
  std::string eval_region;
  std::int64_t eval_seed = -1;
  int region_res = 100;
  double region_v = 1.0, region_theta = 0.0;
  bool region_theta_fixed = false;
  std::string sweep_param;

  auto* gen = app.add_subcommand("gen-data", "generate an offline dataset plus manifest");
  add_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "run the three training stages");
  add_common(train, train_opts);
  train->add_option("--data", train_data, "dataset path (default: data.path from config)");

  auto* ablate = app.add_subcommand("ablate", "train an ablation variant");
  add_common(ablate, ablate_opts);
  ablate->add_option("--data", ablate_data, "dataset path (default: data.path from config)");
  ablate->add_option("--variant", ablate_variant,
                     "full | no_hj | no_infeasible | no_diffusion | il_mode")
      ->required();

  auto* eval = app.add_subcommand("eval", "evaluate a trained run directory");
  add_common(eval, eval_opts, false);
  eval->add_option("--run", eval_run, "run directory with checkpoints")->required();
  eval->add_option("--data", eval_data, "dataset path (default: data.path from config)");
  eval->add_option("--episodes", eval_episodes, "episode count override");
  eval->add_option("--start-region", eval_region, "feasible | infeasible | any");
  eval->add_option("--candidates", eval_candidates, "action candidate count override");
  eval->add_option("--eval-seed", eval_seed, "evaluation seed (default derived)");

  auto* region = app.add_subcommand("dump-region", "value grids, CSV and SVG heatmaps");
  add_common(region, region_opts, false);
  region->add_option("--run", region_run, "run directory with checkpoints")->required();
  region->add_option("--res", region_res, "grid resolution per axis");
  region->add_option("--v", region_v, "speed slice");
  region->add_option("--theta", region_theta, "fixed heading slice (radians)")
      ->each([&](const std::string&) { region_theta_fixed = true; });

  auto* sweep = app.add_subcommand("sweep", "tau or N grid, one metrics row per value");
  add_common(sweep, sweep_opts);
  sweep->add_option("--param", sweep_param, "tau | n")->required();
  sweep->add_option("--data", sweep_data, "dataset path (default: data.path from config)");

  // Every subcommand's --help carries the full config key reference.
  for (CLI::App* sub : {gen, train, ablate, eval, region, sweep})
    sub->footer(config_reference());

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code::usage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_opts);
    if (train->parsed()) return cmd_train(train_opts, train_data, "");
    if (ablate->parsed()) return cmd_train(ablate_opts, ablate_data, ablate_variant);
    if (eval->parsed())
      return cmd_eval(eval_opts, eval_run, eval_data, eval_episodes, eval_region,
                      eval_candidates, eval_seed);
    if (region->parsed())
      return cmd_dump_region(region_opts, region_run, region_res, region_v, region_theta,
                             region_theta_fixed);
    if (sweep->parsed()) return cmd_sweep(sweep_opts, sweep_param, sweep_data);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return exit_code::config_error;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return exit_code::data_error;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return exit_code::data_error;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return exit_code::divergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code::failure;
  }
  return exit_code::usage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace fisor::cli
