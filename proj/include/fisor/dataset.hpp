#ifndef FISOR_DATASET_HPP
#define FISOR_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fisor/env.hpp"

namespace fisor {

enum class HMode : std::uint32_t { geometric = 0, sparse = 1 };

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
  double r = 0.0;
  double c = 0.0;
  double h = 0.0;
  bool done = false;
};

// Aggregate trajectory statistics recorded at generation time; they feed
// evaluation-time reward normalization and the behavior-policy baselines.
struct TrajectoryStats {
  double return_min = 0.0;
  double return_max = 0.0;
  std::uint64_t episodes_feasible_start = 0;
  std::uint64_t episodes_infeasible_start = 0;
  double mean_violation_steps_feasible = 0.0;
  double mean_violation_steps_infeasible = 0.0;
};

// Offline transition store, structure-of-arrays. Row i holds
// (s, a, s_next, r, c, h, done); c and h are the violation signals of the
// state s the action was taken in, so the worst-violation backup has its
// h(s) term available row-locally. done marks goal termination only (time
// limits bootstrap through).
struct Dataset {
  int obs_dim = kObsDim;
  int act_dim = kActDim;
  HMode h_mode = HMode::geometric;
  double sparse_m = 0.0;  // nonzero only in sparse mode
  std::uint64_t env_hash = 0;
  TrajectoryStats traj;

  std::vector<double> obs;       // n * obs_dim
  std::vector<double> act;       // n * act_dim
  std::vector<double> obs_next;  // n * obs_dim
  std::vector<double> rew;
  std::vector<double> cost;
  std::vector<double> hval;
  std::vector<std::uint8_t> done;

  // Successor violation h(s_next); in-memory helper consumed only by the
  // terminal feasible backup, not part of the wire format. Defaults to the
  // row's own h; generate() fills it exactly and attach_h_next() rebuilds
  // it after load.
  std::vector<double> h_next;

  std::size_t size() const { return rew.size(); }
  Transition row(std::size_t i) const;
  void append(const Transition& t);
};

struct DatasetStats {
  std::vector<double> obs_mean;
  std::vector<double> obs_std;  // floored at 1e-6
  std::uint64_t count = 0;
};

// Rolls out the scripted controller for n_scripted transitions and a
// uniform-random policy for n_random more. Start states are uniform over
// the arena (goal-region starts rejected); episode e uses the substream
// (seed, e) so regeneration is bitwise reproducible.
Dataset generate(const EnvConfig& cfg, std::uint64_t n_scripted, std::uint64_t n_random,
                 std::uint64_t seed, double noise_accel = 0.3, double noise_turn = 0.8);

// Cost-only relabeling: h <- -1 where c == 0, h <- M where c > 0.
Dataset relabel_sparse_h(const Dataset& ds, double m);

// Binary rows (little-endian float64) plus a sibling JSON manifest that
// mirrors the header. Loading verifies magic, version, row count against
// both the header and the manifest.
void save(const Dataset& ds, const std::string& path);
Dataset load(const std::string& path);

std::string manifest_path(const std::string& dataset_path);

DatasetStats compute_stats(const Dataset& ds);
std::vector<double> normalize(const std::vector<double>& obs, const DatasetStats& stats);

// Copy of the dataset with obs and obs_next normalized.
Dataset normalized_copy(const Dataset& ds, const DatasetStats& stats);

// Rebuilds h_next from next-observation positions using the environment
// geometry (sign-mapped to {M, -1} for sparse datasets). Use after load().
void attach_h_next(Dataset& ds, const EnvConfig& cfg);

// Identity statistics (mean 0, std 1) for the normalize-disabled path.
DatasetStats identity_stats(int obs_dim);

}  // namespace fisor

#endif
