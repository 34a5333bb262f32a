#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "fisor/cli.hpp"
#include "fisor/errors.hpp"
#include "fisor/run_config.hpp"

using namespace fisor;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Microscopic end-to-end config so CLI plumbing tests stay fast.
std::string write_micro_config(const fs::path& dir) {
  RunConfig cfg;
  cfg.data.path = (dir / "dataset.bin").string();
  cfg.data.n_scripted = 800;
  cfg.data.n_random = 800;
  cfg.critic.batch = 32;
  cfg.critic.log_every = 50;
  cfg.critic_hidden = {8, 8};
  cfg.feasible_steps = 60;
  cfg.reward_steps = 60;
  cfg.diffusion.hidden = {8, 8};
  cfg.diffusion.batch = 32;
  cfg.diffusion.steps = 60;
  cfg.diffusion.log_every = 50;
  cfg.eval.episodes = 2;
  cfg.eval.n_candidates = 2;
  cfg.seed = 3;
  nlohmann::json j;
  to_json(j, cfg);
  const std::string path = (dir / "config.json").string();
  std::ofstream(path) << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("unknown subcommand and missing args exit with usage") {
  CHECK(cli::run({"frobnicate"}) == exit_code::usage);
  CHECK(cli::run({}) == exit_code::usage);
  CHECK(cli::run({"ablate"}) == exit_code::usage);  // --variant required
}

TEST_CASE("help exits cleanly") {
  CHECK(cli::run({"--help"}) == 0);
  CHECK(cli::run({"train", "--help"}) == 0);
}

TEST_CASE("config errors map to the config exit code") {
  const auto dir = temp_dir("fisor_cli_cfgerr");
  const std::string cfg = write_micro_config(dir);
  CHECK(cli::run({"gen-data", "--config", cfg, "--set", "critic.tau=0.2"}) ==
        exit_code::config_error);
  CHECK(cli::run({"gen-data", "--config", cfg, "--set", "nope=1"}) ==
        exit_code::config_error);
  CHECK(cli::run({"ablate", "--config", cfg, "--variant", "bogus"}) ==
        exit_code::config_error);
  // Nonexistent config file is caught by CLI11 validation.
  CHECK(cli::run({"gen-data", "--config", (dir / "missing.json").string()}) ==
        exit_code::usage);
  fs::remove_all(dir);
}

TEST_CASE("missing dataset maps to the data exit code") {
  const auto dir = temp_dir("fisor_cli_nodata");
  const std::string cfg = write_micro_config(dir);
  CHECK(cli::run({"train", "--config", cfg, "--out", (dir / "runs").string()}) ==
        exit_code::data_error);
  fs::remove_all(dir);
}

TEST_CASE("gen-data, train, eval, dump-region round trip") {
  const auto dir = temp_dir("fisor_cli_e2e");
  const std::string cfg = write_micro_config(dir);

  CHECK(cli::run({"gen-data", "--config", cfg}) == exit_code::ok);
  CHECK(fs::exists(dir / "dataset.bin"));
  CHECK(fs::exists(dir / "dataset.json"));

  const std::string runs = (dir / "runs").string();
  CHECK(cli::run({"train", "--config", cfg, "--out", runs, "--run-id", "main"}) ==
        exit_code::ok);
  const fs::path run_dir = dir / "runs" / "main";
  CHECK(fs::exists(run_dir / "policy.net"));
  CHECK(fs::exists(run_dir / "config.json"));

  CHECK(cli::run({"eval", "--run", run_dir.string(), "--episodes", "2"}) == exit_code::ok);
  CHECK(fs::exists(run_dir / "eval_report.json"));

  CHECK(cli::run({"dump-region", "--run", run_dir.string(), "--res", "24"}) ==
        exit_code::ok);
  CHECK(fs::exists(run_dir / "region.csv"));
  CHECK(fs::exists(run_dir / "region.svg"));
  CHECK(fs::exists(run_dir / "region_metrics.json"));
  fs::remove_all(dir);
}

TEST_CASE("rerun with identical config and seed rewrites identical outputs") {
  const auto dir = temp_dir("fisor_cli_idem");
  const std::string cfg = write_micro_config(dir);
  REQUIRE(cli::run({"gen-data", "--config", cfg}) == exit_code::ok);
  const std::string runs = (dir / "runs").string();

  REQUIRE(cli::run({"train", "--config", cfg, "--out", runs}) == exit_code::ok);
  // The derived run id is config-hash based, so the rerun hits the same dir.
  fs::path run_dir;
  for (const auto& e : fs::directory_iterator(dir / "runs")) run_dir = e.path();
  const std::string policy_before = slurp(run_dir / "policy.net");
  const std::string curves_before = slurp(run_dir / "value_curves.csv");

  REQUIRE(cli::run({"train", "--config", cfg, "--out", runs}) == exit_code::ok);
  int run_count = 0;
  for (const auto& e : fs::directory_iterator(dir / "runs")) {
    (void)e;
    ++run_count;
  }
  CHECK(run_count == 1);
  CHECK(slurp(run_dir / "policy.net") == policy_before);
  CHECK(slurp(run_dir / "value_curves.csv") == curves_before);
  fs::remove_all(dir);
}

TEST_CASE("ablate no_hj trains cost critics and dumps the cost region") {
  const auto dir = temp_dir("fisor_cli_ablate");
  const std::string cfg = write_micro_config(dir);
  REQUIRE(cli::run({"gen-data", "--config", cfg}) == exit_code::ok);
  const std::string runs = (dir / "runs").string();
  CHECK(cli::run({"ablate", "--config", cfg, "--variant", "no_hj", "--out", runs,
                  "--run-id", "nohj"}) == exit_code::ok);
  const fs::path run_dir = dir / "runs" / "nohj";
  CHECK(fs::exists(run_dir / "vc.net"));
  CHECK(fs::exists(run_dir / "qc1.net"));
  // Saved config carries the variant for later eval/dump calls.
  const auto saved = nlohmann::json::parse(slurp(run_dir / "config.json"));
  CHECK(saved.at("ablation") == "no_hj");
  CHECK(cli::run({"dump-region", "--run", run_dir.string(), "--res", "16"}) ==
        exit_code::ok);
  CHECK(fs::exists(run_dir / "region_cost.svg"));
  fs::remove_all(dir);
}

TEST_CASE("sweep over n writes one row per candidate count") {
  const auto dir = temp_dir("fisor_cli_sweep");
  const std::string cfg = write_micro_config(dir);
  REQUIRE(cli::run({"gen-data", "--config", cfg}) == exit_code::ok);
  const std::string runs = (dir / "sweep").string();
  CHECK(cli::run({"sweep", "--param", "n", "--config", cfg, "--out", runs}) ==
        exit_code::ok);
  const std::string csv = slurp(fs::path(runs) / "sweep_n.csv");
  CHECK(csv.find("param,value") == 0);
  int rows = -1;  // header
  for (char c : csv)
    if (c == '\n') ++rows;
  CHECK(rows == 4);
  CHECK(csv.find("n,1,") != std::string::npos);
  CHECK(csv.find("n,64,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweep over tau writes one row per tau") {
  const auto dir = temp_dir("fisor_cli_sweep_tau");
  const std::string cfg = write_micro_config(dir);
  REQUIRE(cli::run({"gen-data", "--config", cfg}) == exit_code::ok);
  const std::string runs = (dir / "sweep").string();
  CHECK(cli::run({"sweep", "--param", "tau", "--config", cfg, "--out", runs}) ==
        exit_code::ok);
  const std::string csv = slurp(fs::path(runs) / "sweep_tau.csv");
  int rows = -1;
  for (char c : csv)
    if (c == '\n') ++rows;
  CHECK(rows == 4);
  CHECK(csv.find("tau,0.7,") != std::string::npos);
  CHECK(csv.find("tau,0.95,") != std::string::npos);
  CHECK(fs::exists(fs::path(runs) / "tau_0.9" / "policy.net"));
  fs::remove_all(dir);
}

TEST_CASE("corrupt dataset file maps to the data exit code") {
  const auto dir = temp_dir("fisor_cli_corrupt");
  const std::string cfg = write_micro_config(dir);
  std::ofstream(dir / "dataset.bin", std::ios::binary) << "garbage";
  CHECK(cli::run({"train", "--config", cfg, "--out", (dir / "runs").string()}) ==
        exit_code::data_error);
  fs::remove_all(dir);
}
