#include "fisor/policy.hpp"

#include "fisor/checkpoint.hpp"
#include "fisor/errors.hpp"

namespace fisor {

std::vector<double> Policy::sample(const double* obs, RngStream& rng) const {
  if (kind == Kind::diffusion)
    return sample_action(predictor, schedule, obs, rng, act_lo, act_hi);
  return sample_gaussian_action(gauss_mean, obs, rng, act_lo, act_hi);
}

void Policy::save(const std::string& path, std::uint64_t step, std::uint64_t seed) const {
  nlohmann::json extras{
      {"policy_kind", kind == Kind::diffusion ? "diffusion" : "gaussian"},
      {"act_lo", act_lo},
      {"act_hi", act_hi},
  };
  if (kind == Kind::diffusion) {
    extras["schedule"] = schedule.to_json();
    extras["obs_dim"] = predictor.obs_dim;
    extras["act_dim"] = predictor.act_dim;
    save_checkpoint(path, predictor.net, nullptr, step, seed, extras);
  } else {
    save_checkpoint(path, gauss_mean, nullptr, step, seed, extras);
  }
}

Policy Policy::load(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  Policy p;
  p.act_lo = ckpt.header.at("act_lo").get<std::vector<double>>();
  p.act_hi = ckpt.header.at("act_hi").get<std::vector<double>>();
  const std::string kind = ckpt.header.at("policy_kind").get<std::string>();
  if (kind == "diffusion") {
    p.kind = Kind::diffusion;
    p.schedule = NoiseSchedule::from_json(ckpt.header.at("schedule"));
    p.predictor.net = ckpt.net;
    p.predictor.obs_dim = ckpt.header.at("obs_dim").get<int>();
    p.predictor.act_dim = ckpt.header.at("act_dim").get<int>();
  } else if (kind == "gaussian") {
    p.kind = Kind::gaussian;
    p.gauss_mean = ckpt.net;
  } else {
    throw DataError(DataError::Kind::io, "policy load: unknown kind " + kind);
  }
  return p;
}

}  // namespace fisor
