#include "fisor/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "fisor/errors.hpp"

#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian; big-endian hosts unsupported");

namespace fisor {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'R', 'D', 'S', 'E', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kFieldOrder = "s|a|s_next|r|c|h|done";

struct BinaryHeader {
  std::uint32_t version = kVersion;
  std::uint32_t obs_dim = 0;
  std::uint32_t act_dim = 0;
  std::uint32_t h_mode = 0;
  std::uint64_t count = 0;
  std::uint64_t env_hash = 0;
  double sparse_m = 0.0;
  double return_min = 0.0;
  double return_max = 0.0;
  std::uint64_t eps_feasible = 0;
  std::uint64_t eps_infeasible = 0;
  double viol_feasible = 0.0;
  double viol_infeasible = 0.0;
};

void check_finite_row(const Transition& t) {
  auto ok = [](double v) { return std::isfinite(v); };
  for (double v : t.s)
    if (!ok(v)) throw InputError("dataset: non-finite observation");
  for (double v : t.a)
    if (!ok(v)) throw InputError("dataset: non-finite action");
  for (double v : t.s_next)
    if (!ok(v)) throw InputError("dataset: non-finite next observation");
  if (!ok(t.r) || !ok(t.c) || !ok(t.h)) throw InputError("dataset: non-finite scalar field");
}

}  // namespace

Transition Dataset::row(std::size_t i) const {
  Transition t;
  t.s.assign(obs.begin() + i * obs_dim, obs.begin() + (i + 1) * obs_dim);
  t.a.assign(act.begin() + i * act_dim, act.begin() + (i + 1) * act_dim);
  t.s_next.assign(obs_next.begin() + i * obs_dim, obs_next.begin() + (i + 1) * obs_dim);
  t.r = rew[i];
  t.c = cost[i];
  t.h = hval[i];
  t.done = done[i] != 0;
  return t;
}

void Dataset::append(const Transition& t) {
  check_finite_row(t);
  obs.insert(obs.end(), t.s.begin(), t.s.end());
  act.insert(act.end(), t.a.begin(), t.a.end());
  obs_next.insert(obs_next.end(), t.s_next.begin(), t.s_next.end());
  rew.push_back(t.r);
  cost.push_back(t.c);
  hval.push_back(t.h);
  done.push_back(t.done ? 1 : 0);
  h_next.push_back(t.h);
}

Dataset generate(const EnvConfig& cfg, std::uint64_t n_scripted, std::uint64_t n_random,
                 std::uint64_t seed, double noise_accel, double noise_turn) {
  cfg.validate();
  const std::uint64_t total = n_scripted + n_random;
  if (total == 0) throw ConfigError("generate: zero transitions requested");

  Dataset ds;
  ds.env_hash = config_hash(cfg);
  ds.obs.reserve(total * kObsDim);
  ds.act.reserve(total * kActDim);
  ds.obs_next.reserve(total * kObsDim);
  ds.rew.reserve(total);

  double ret_min = std::numeric_limits<double>::infinity();
  double ret_max = -std::numeric_limits<double>::infinity();
  std::uint64_t eps_feas = 0, eps_infeas = 0;
  double viol_feas = 0.0, viol_infeas = 0.0;

  std::uint64_t episode = 0;
  std::uint64_t collected = 0;
  while (collected < total) {
    const bool scripted = collected < n_scripted;
    RngStream rng = RngStream::substream(seed, episode);
    EnvState s = sample_start(cfg, rng);
    const bool start_feasible = oracle_feasible(s, cfg);
    double h_here = violation(s.x, s.y, cfg);

    double ep_return = 0.0;
    std::uint64_t ep_violations = h_here > 0.0 ? 1 : 0;
    bool truncated_mid_episode = false;
    for (;;) {
      Action a;
      if (scripted) {
        a = scripted_behavior(s, cfg, rng, noise_accel, noise_turn);
      } else {
        a = Action{rng.uniform(-cfg.accel_bound, cfg.accel_bound),
                   rng.uniform(-cfg.turn_bound, cfg.turn_bound)};
      }
      const StepResult r = step(s, a, cfg);

      Transition t;
      t.s = observe(s);
      t.a = {a.accel, a.turn};
      t.s_next = observe(r.next);
      t.r = r.reward;
      t.c = std::max(h_here, 0.0);
      t.h = h_here;
      t.done = r.reached_goal;
      ds.append(t);
      ds.h_next.back() = r.h;
      ++collected;

      ep_return += r.reward;
      if (r.h > 0.0) ++ep_violations;
      h_here = r.h;
      s = r.next;
      if (collected == total && !r.done) {
        truncated_mid_episode = true;
        break;
      }
      if (r.done) break;
    }

    // Episode-level statistics skip the row-budget-truncated tail episode.
    if (!truncated_mid_episode) {
      ret_min = std::min(ret_min, ep_return);
      ret_max = std::max(ret_max, ep_return);
      if (start_feasible) {
        ++eps_feas;
        viol_feas += static_cast<double>(ep_violations);
      } else {
        ++eps_infeas;
        viol_infeas += static_cast<double>(ep_violations);
      }
    }
    ++episode;
  }

  ds.traj.return_min = std::isfinite(ret_min) ? ret_min : 0.0;
  ds.traj.return_max = std::isfinite(ret_max) ? ret_max : 0.0;
  ds.traj.episodes_feasible_start = eps_feas;
  ds.traj.episodes_infeasible_start = eps_infeas;
  ds.traj.mean_violation_steps_feasible = eps_feas ? viol_feas / eps_feas : 0.0;
  ds.traj.mean_violation_steps_infeasible = eps_infeas ? viol_infeas / eps_infeas : 0.0;
  return ds;
}

Dataset relabel_sparse_h(const Dataset& ds, double m) {
  if (!(m > 0.0)) throw ConfigError("relabel_sparse_h: M must be > 0");
  Dataset out = ds;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.hval[i] = out.cost[i] > 0.0 ? m : -1.0;
    out.h_next[i] = out.h_next[i] > 0.0 ? m : -1.0;
  }
  out.h_mode = HMode::sparse;
  out.sparse_m = m;
  return out;
}

std::string manifest_path(const std::string& dataset_path) {
  std::filesystem::path p(dataset_path);
  if (p.has_extension())
    p.replace_extension(".json");
  else
    p += ".json";
  return p.string();
}

void save(const Dataset& ds, const std::string& path) {
  BinaryHeader hdr;
  hdr.obs_dim = static_cast<std::uint32_t>(ds.obs_dim);
  hdr.act_dim = static_cast<std::uint32_t>(ds.act_dim);
  hdr.h_mode = static_cast<std::uint32_t>(ds.h_mode);
  hdr.count = ds.size();
  hdr.env_hash = ds.env_hash;
  hdr.sparse_m = ds.sparse_m;
  hdr.return_min = ds.traj.return_min;
  hdr.return_max = ds.traj.return_max;
  hdr.eps_feasible = ds.traj.episodes_feasible_start;
  hdr.eps_infeasible = ds.traj.episodes_infeasible_start;
  hdr.viol_feasible = ds.traj.mean_violation_steps_feasible;
  hdr.viol_infeasible = ds.traj.mean_violation_steps_infeasible;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::io, "dataset save: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  f.write(reinterpret_cast<const char*>(&hdr), sizeof(hdr));
  const std::uint32_t fo_len = static_cast<std::uint32_t>(std::strlen(kFieldOrder));
  f.write(reinterpret_cast<const char*>(&fo_len), sizeof(fo_len));
  f.write(kFieldOrder, fo_len);

  std::vector<double> rowbuf(2 * ds.obs_dim + ds.act_dim + 4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double* p = rowbuf.data();
    std::memcpy(p, ds.obs.data() + i * ds.obs_dim, ds.obs_dim * sizeof(double));
    p += ds.obs_dim;
    std::memcpy(p, ds.act.data() + i * ds.act_dim, ds.act_dim * sizeof(double));
    p += ds.act_dim;
    std::memcpy(p, ds.obs_next.data() + i * ds.obs_dim, ds.obs_dim * sizeof(double));
    p += ds.obs_dim;
    p[0] = ds.rew[i];
    p[1] = ds.cost[i];
    p[2] = ds.hval[i];
    p[3] = ds.done[i] ? 1.0 : 0.0;
    f.write(reinterpret_cast<const char*>(rowbuf.data()),
            static_cast<std::streamsize>(rowbuf.size() * sizeof(double)));
  }
  if (!f) throw DataError(DataError::Kind::io, "dataset save: write failed for " + path);
  f.close();

  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(ds.env_hash));
  nlohmann::json manifest{
      {"version", kVersion},
      {"field_order", kFieldOrder},
      {"format", "f64le-rows"},
      {"obs_dim", ds.obs_dim},
      {"act_dim", ds.act_dim},
      {"h_mode", ds.h_mode == HMode::geometric ? "geometric" : "sparse"},
      {"sparse_m", ds.sparse_m},
      {"count", ds.size()},
      {"env_config_hash", std::string(hash_hex)},
      {"trajectories",
       {{"return_min", ds.traj.return_min},
        {"return_max", ds.traj.return_max},
        {"episodes_feasible_start", ds.traj.episodes_feasible_start},
        {"episodes_infeasible_start", ds.traj.episodes_infeasible_start},
        {"mean_violation_steps_feasible", ds.traj.mean_violation_steps_feasible},
        {"mean_violation_steps_infeasible", ds.traj.mean_violation_steps_infeasible}}},
  };
  std::ofstream mf(manifest_path(path), std::ios::trunc);
  if (!mf) throw DataError(DataError::Kind::io, "dataset save: cannot open manifest");
  mf << manifest.dump(2) << "\n";
}

Dataset load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError(DataError::Kind::io, "dataset load: cannot open " + path);

  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError(DataError::Kind::bad_magic, "dataset load: not a dataset file");

  BinaryHeader hdr;
  f.read(reinterpret_cast<char*>(&hdr), sizeof(hdr));
  if (!f) throw DataError(DataError::Kind::truncated, "dataset load: truncated header");
  if (hdr.version != kVersion)
    throw DataError(DataError::Kind::version_mismatch,
                    "dataset load: unsupported version " + std::to_string(hdr.version));

  std::uint32_t fo_len = 0;
  f.read(reinterpret_cast<char*>(&fo_len), sizeof(fo_len));
  std::string field_order(fo_len, '\0');
  f.read(field_order.data(), fo_len);
  if (!f || field_order != kFieldOrder)
    throw DataError(DataError::Kind::version_mismatch, "dataset load: unexpected field order");

  const std::size_t row_doubles = 2 * hdr.obs_dim + hdr.act_dim + 4;
  const auto payload_start = f.tellg();
  f.seekg(0, std::ios::end);
  const std::uint64_t payload_bytes = static_cast<std::uint64_t>(f.tellg() - payload_start);
  if (payload_bytes != hdr.count * row_doubles * sizeof(double))
    throw DataError(DataError::Kind::truncated, "dataset load: row payload size mismatch");
  f.seekg(payload_start);

  // Manifest must exist and agree with the binary header.
  std::ifstream mf(manifest_path(path));
  if (!mf)
    throw DataError(DataError::Kind::manifest_mismatch, "dataset load: missing manifest");
  nlohmann::json manifest = nlohmann::json::parse(mf, nullptr, false);
  if (manifest.is_discarded())
    throw DataError(DataError::Kind::manifest_mismatch, "dataset load: unparsable manifest");
  if (manifest.value("count", std::uint64_t{0}) != hdr.count)
    throw DataError(DataError::Kind::truncated,
                    "dataset load: manifest count does not match row count");
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(hdr.env_hash));
  if (manifest.value("env_config_hash", "") != std::string(hash_hex))
    throw DataError(DataError::Kind::manifest_mismatch,
                    "dataset load: manifest env-config hash disagrees with header");

  Dataset ds;
  ds.obs_dim = static_cast<int>(hdr.obs_dim);
  ds.act_dim = static_cast<int>(hdr.act_dim);
  ds.h_mode = static_cast<HMode>(hdr.h_mode);
  ds.sparse_m = hdr.sparse_m;
  ds.env_hash = hdr.env_hash;
  ds.traj.return_min = hdr.return_min;
  ds.traj.return_max = hdr.return_max;
  ds.traj.episodes_feasible_start = hdr.eps_feasible;
  ds.traj.episodes_infeasible_start = hdr.eps_infeasible;
  ds.traj.mean_violation_steps_feasible = hdr.viol_feasible;
  ds.traj.mean_violation_steps_infeasible = hdr.viol_infeasible;

  ds.obs.resize(hdr.count * hdr.obs_dim);
  ds.act.resize(hdr.count * hdr.act_dim);
  ds.obs_next.resize(hdr.count * hdr.obs_dim);
  ds.rew.resize(hdr.count);
  ds.cost.resize(hdr.count);
  ds.hval.resize(hdr.count);
  ds.done.resize(hdr.count);

  std::vector<double> rowbuf(row_doubles);
  for (std::uint64_t i = 0; i < hdr.count; ++i) {
    f.read(reinterpret_cast<char*>(rowbuf.data()),
           static_cast<std::streamsize>(rowbuf.size() * sizeof(double)));
    if (!f) throw DataError(DataError::Kind::truncated, "dataset load: truncated rows");
    const double* p = rowbuf.data();
    std::memcpy(ds.obs.data() + i * hdr.obs_dim, p, hdr.obs_dim * sizeof(double));
    p += hdr.obs_dim;
    std::memcpy(ds.act.data() + i * hdr.act_dim, p, hdr.act_dim * sizeof(double));
    p += hdr.act_dim;
    std::memcpy(ds.obs_next.data() + i * hdr.obs_dim, p, hdr.obs_dim * sizeof(double));
    p += hdr.obs_dim;
    ds.rew[i] = p[0];
    ds.cost[i] = p[1];
    ds.hval[i] = p[2];
    ds.done[i] = p[3] != 0.0 ? 1 : 0;
  }
  ds.h_next = ds.hval;  // degenerate until attach_h_next()
  return ds;
}

void attach_h_next(Dataset& ds, const EnvConfig& cfg) {
  ds.h_next.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double x = ds.obs_next[i * ds.obs_dim + 0];
    const double y = ds.obs_next[i * ds.obs_dim + 1];
    const double h = violation(x, y, cfg);
    ds.h_next[i] = ds.h_mode == HMode::sparse ? (h > 0.0 ? ds.sparse_m : -1.0) : h;
  }
}

DatasetStats compute_stats(const Dataset& ds) {
  if (ds.size() == 0) throw DataError(DataError::Kind::empty, "compute_stats: empty dataset");
  const int d = ds.obs_dim;
  DatasetStats st;
  st.obs_mean.assign(d, 0.0);
  st.obs_std.assign(d, 0.0);
  st.count = ds.size();
  const double n = static_cast<double>(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (int k = 0; k < d; ++k) st.obs_mean[k] += ds.obs[i * d + k];
  for (int k = 0; k < d; ++k) st.obs_mean[k] /= n;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (int k = 0; k < d; ++k) {
      const double dv = ds.obs[i * d + k] - st.obs_mean[k];
      st.obs_std[k] += dv * dv;
    }
  for (int k = 0; k < d; ++k)
    st.obs_std[k] = std::max(std::sqrt(st.obs_std[k] / n), 1e-6);  // population std
  return st;
}

std::vector<double> normalize(const std::vector<double>& obs, const DatasetStats& stats) {
  std::vector<double> out(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k)
    out[k] = (obs[k] - stats.obs_mean[k]) / stats.obs_std[k];
  return out;
}

Dataset normalized_copy(const Dataset& ds, const DatasetStats& stats) {
  Dataset out = ds;
  const int d = ds.obs_dim;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (int k = 0; k < d; ++k) {
      out.obs[i * d + k] = (ds.obs[i * d + k] - stats.obs_mean[k]) / stats.obs_std[k];
      out.obs_next[i * d + k] = (ds.obs_next[i * d + k] - stats.obs_mean[k]) / stats.obs_std[k];
    }
  return out;
}

DatasetStats identity_stats(int obs_dim) {
  DatasetStats st;
  st.obs_mean.assign(obs_dim, 0.0);
  st.obs_std.assign(obs_dim, 1.0);
  return st;
}

}  // namespace fisor
